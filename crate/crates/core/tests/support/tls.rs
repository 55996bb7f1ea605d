use std::sync::Arc;

/// Self-signed certificate for `localhost`: (cert PEM, key PEM).
pub fn localhost_cert() -> (String, String) {
    let ck = rcgen::generate_simple_self_signed(vec!["localhost".to_owned()]).unwrap();
    (ck.cert.pem(), ck.key_pair.serialize_pem())
}

pub fn server_config(cert: &str, key: &str) -> Arc<rustls::ServerConfig> {
    bundle_audit::net::tls_server_config(cert.as_bytes(), key.as_bytes()).unwrap()
}
