// Benign test payload: records that it was loaded, inside its own directory.
const fs = require('fs');
const path = require('path');

fs.writeFileSync(path.join(__dirname, 'beacon-loaded.txt'), new Date().toISOString() + '\n');
