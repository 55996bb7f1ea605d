require('p149');
require('p150');
require('p151');
