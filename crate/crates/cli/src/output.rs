use std::io::{IsTerminal, Write};

use clap::ValueEnum;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
}

pub struct Out {
    pub format: Format,
    bold: bool,
}

impl Out {
    pub fn new(format: Format) -> Self {
        let bold = std::io::stdout().is_terminal() && std::env::var_os("NO_COLOR").is_none_or(|v| v.is_empty());
        Out { format, bold }
    }

    pub fn json(&self) -> bool {
        self.format == Format::Json
    }

    /// Print a rendered table, emboldening its header row on a terminal.
    pub fn table(&self, text: &str) {
        let text = match text.split_once('\n') {
            Some((head, rest)) if self.bold && head.contains("  ") => format!("\x1b[1m{head}\x1b[0m\n{rest}"),
            _ => text.to_owned(),
        };
        self.text(&text);
    }

    pub fn text(&self, text: &str) {
        let mut stdout = std::io::stdout().lock();
        let _ = stdout.write_all(text.as_bytes());
        let _ = stdout.flush();
    }

    pub fn envelope<T: Serialize>(&self, kind: &str, report: &T) {
        self.text(&bundle_audit::report::json_envelope(kind, report));
    }
}
