require('safe-lib');
