#![no_main]

use hipose::bench::{BenchFile, BenchPlan, Preset, ScenarioConfig};
use hipose::SolverConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = toml::from_str::<SolverConfig>(text) {
        let _ = cfg.validate(16);
    }
    if let Ok(cfg) = toml::from_str::<ScenarioConfig>(text) {
        let _ = cfg.validate();
    }
    if let Ok(file) = BenchFile::parse(text) {
        let mut plan: BenchPlan = Preset::Table3.plan(1);
        let _ = file.apply(&mut plan);
    }
});
