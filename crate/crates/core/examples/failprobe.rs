use ddsvr::evaluation::MethodId;
use ddsvr::simulation::{run_cell, ModelSpec, NoiseFamily, NoiseSpec, SimSpec};
fn main() {
    let spec = SimSpec {
        model: ModelSpec::Linear { beta0: 1.0, beta1: 2.0 },
        noise: NoiseSpec { family: NoiseFamily::EpsLaplacian { epsilon: 0.8 }, scale: 0.5 },
        n: 300,
        repetitions: 20,
        seed: 20260809,
    };
    let report = run_cell(&spec, &[MethodId::Dd], None, 1.0);
    for (rep, msg) in &report.failures {
        println!("rep {rep}: {msg}");
    }
}
