//! A marker placed before the front loop shows up at the complement port.

use whichway::run::{execute, RunConfig};

fn main() -> whichway::Result<()> {
    let out = execute(&RunConfig::from_preset("premark")?)?;
    let line = 15_000.0;
    println!("O port:  {:.3e}", out.peaks.at(line).map_or(0.0, |p| p.height));
    for port in &out.extra_ports {
        println!("{:?} port: {:.3e}", port.port, port.peaks.at(line).map_or(0.0, |p| p.height));
    }
    Ok(())
}
