//! Load a JSON config, run it and write the output tables.

use whichway::run::{execute, load_config, write_outputs};

const CONFIG: &str = r#"{
  "name": "slow-markers",
  "scenario": { "chi_ii": 0.0, "ww_angle": 0.2, "contrast": [[1, 0.8, 0.7], [0.8, 1, 0.6], [0.7, 0.6, 1]] },
  "grid": { "sample_rate": 64000, "n_samples": 1024 },
  "analysis": { "pad_factor": 4 }
}"#;

fn main() -> whichway::Result<()> {
    let dir = std::env::temp_dir().join("whichway-custom-config");
    let path = dir.join("config.json");
    std::fs::create_dir_all(&dir).and_then(|_| std::fs::write(&path, CONFIG)).map_err(|source| whichway::Error::Io {
        path: path.display().to_string(),
        source,
    })?;

    let cfg = load_config(path.to_str().unwrap())?;
    let out = execute(&cfg)?;
    let manifest = write_outputs(&cfg, &out, &dir)?;
    println!("wrote {} into {}", manifest.outputs.join(", "), dir.display());
    println!("peaks: {:?}", out.peaks.heights());
    Ok(())
}
