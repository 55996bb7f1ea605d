// Minimal fixture entry point.
console.log('minimal');
