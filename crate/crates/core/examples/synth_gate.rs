use pathlets::pipeline::{synth_recovery, RunParams};
use pathlets::synth::PlantedSpec;
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let (report, _, _) = synth_recovery(&PlantedSpec::frozen_gate(), &RunParams::synth_gate()).unwrap();
    println!("recovery {} in {:.0}s ({} epochs, loss {:.4})",
        report.recovery, t0.elapsed().as_secs_f64(), report.epochs, report.final_loss);
}
