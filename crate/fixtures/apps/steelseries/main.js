require('gg-core').run();
