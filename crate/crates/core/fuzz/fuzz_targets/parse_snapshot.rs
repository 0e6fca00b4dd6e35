#![no_main]

use libfuzzer_sys::fuzz_target;
use nsfvfe::harness::{parse_snapshot, write_snapshot_string};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(traj) = parse_snapshot(text) {
        let again = parse_snapshot(&write_snapshot_string(&traj)).expect("round trip");
        assert_eq!(again.states, traj.states);
    }
});
