// benign stand-in for a replaced application payload
module.exports = 'rogue';
