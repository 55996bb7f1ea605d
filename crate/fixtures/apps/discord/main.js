const qs = require('qs-lite');
const md = require('mini-marked');
