console.log('not a fixture');
