'use strict';
// entry
const { app } = require('electron');
const ui = require('@acme/ui/widgets');
const path = require('node:path');

app.on('ready', () => ui.show(path.sep));
