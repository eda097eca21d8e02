#![no_main]

use hipose::encoding::{decode_encoding, encode_encoding};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(enc) = decode_encoding(data) {
        // anything accepted must survive a round trip
        assert_eq!(decode_encoding(&encode_encoding(&enc)).unwrap(), enc);
    }
});
