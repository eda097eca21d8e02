#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(mesh) = hipose::mesh::parse_obj(text) {
            let _ = hipose::upsample_mesh(&mesh, 6);
        }
    }
});
