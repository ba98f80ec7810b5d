//! Writes rosette trajectories as JSON and CSV and reads them back.

use fpe::integrate::BranchPolicy;
use fpe::io::{read_trajectories_csv, read_trajectories_json, write_trajectories_csv, write_trajectories_json};
use fpe::systems::rosette::build_rosette;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let policy = BranchPolicy { horizon: 2.0, branch_window: None, ..Default::default() };
    let g = build_rosette(3)?.generate(&policy, 0.01)?;
    let (mut json, mut csv) = (Vec::new(), Vec::new());
    write_trajectories_json(&mut json, &g.trajectories)?;
    write_trajectories_csv(&mut csv, &g.trajectories)?;
    let back = read_trajectories_json(&json[..])?;
    let from_csv = read_trajectories_csv(&csv[..], "rosette:3")?;
    println!("{} trajectories, {} JSON bytes, {} CSV bytes", g.trajectories.len(), json.len(), csv.len());
    println!("JSON round trip exact: {}", back == g.trajectories);
    println!("CSV round trip keeps samples: {}", from_csv.iter().zip(&g.trajectories).all(|(a, b)| a.points == b.points));
    println!("first decisions: {:?}", back[1].decisions.iter().map(|d| d.choice.label()).collect::<Vec<_>>());
    Ok(())
}
