require('bravo');
