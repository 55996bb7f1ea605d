const bravo = require('bravo');
const charlie = require('charlie');

bravo.start(charlie);
