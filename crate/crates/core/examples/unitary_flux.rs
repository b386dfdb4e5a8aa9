//! With lossless splitters and no analyzer, every neutron leaves somewhere.

use whichway::beamline::{
    mean_intensity, propagate, ContrastMatrix, EcSign, Engine, Normalization, Port, ScenarioConfig, Splitters,
};

fn main() -> whichway::Result<()> {
    let cfg = ScenarioConfig {
        chi_ii: 0.9,
        engine: Engine::Exact,
        normalization: Normalization::UnitaryNetwork,
        splitters: Splitters::calibrated(0.6, 0.75, 0.7)?,
        analyzer: false,
        ..Default::default()
    };
    let ports = propagate(&cfg, EcSign::Minus)?;
    let mut total = 0.0;
    for port in Port::ALL {
        let i = mean_intensity(ports.port(port), &ContrastMatrix::ideal());
        total += i;
        println!("{port:?}: {i:.6}");
    }
    println!("sum: {total:.12}");
    Ok(())
}
