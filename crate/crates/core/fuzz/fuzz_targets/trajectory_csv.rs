#![no_main]
use libfuzzer_sys::fuzz_target;
use magcomb::io::{read_trajectory_csv, write_trajectory_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(traj) = read_trajectory_csv(data) {
        assert!(traj.len() >= 2);
        assert!(traj.dt_sample > 0.0);
        let mut out = Vec::new();
        write_trajectory_csv(&mut out, &traj).expect("parsed trajectory writes");
    }
});
