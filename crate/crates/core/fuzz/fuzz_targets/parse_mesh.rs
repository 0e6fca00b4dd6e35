#![no_main]

use libfuzzer_sys::fuzz_target;
use nsfvfe::mesh::io::{parse_mesh, write_mesh_string};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(mesh) = parse_mesh(text) {
        // anything accepted must survive a write/read cycle unchanged
        let again = parse_mesh(&write_mesh_string(&mesh)).expect("round trip");
        assert_eq!(again.cells(), mesh.cells());
        assert_eq!(again.vertices(), mesh.vertices());
    }
});
