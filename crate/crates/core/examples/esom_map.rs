// Train an emergent self-organizing map on two synthetic clusters.
//
// `cargo run --release --example esom_map`

use std::collections::BTreeSet;
use std::error::Error;

use concept_workbench::esom::{
    compute_umatrix, data_bounds, export_map, init_grid_within, project, train_with_trace, FeatureVector, MapLabel,
    Topology, TrainingSchedule, DEFAULT_COLS, DEFAULT_EPOCHS, DEFAULT_ROWS,
};

fn fixture(name: &str) -> String {
    let path = format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let vectors: Vec<FeatureVector> = serde_json::from_str(&fixture("two_clusters.json"))?;
    let bounds = data_bounds(&vectors).ok_or("no vectors")?;
    let grid = init_grid_within(DEFAULT_ROWS, DEFAULT_COLS, Topology::Toroid, &bounds, 7)?;
    let schedule = TrainingSchedule::for_grid(DEFAULT_ROWS, DEFAULT_COLS, DEFAULT_EPOCHS);
    let (trained, trace) = train_with_trace(&grid, &vectors, &schedule)?;
    println!(
        "quantization error {:.4} before, {:.4} after {} epochs",
        trace[0],
        trace[trace.len() - 1],
        schedule.epochs
    );

    let labels: Vec<MapLabel> = vectors
        .iter()
        .map(|v| MapLabel {
            label: v.object_id.clone(),
            url: format!("urn:example:{}", v.object_id),
        })
        .collect();
    let positions = project(&trained, &vectors, &labels)?;
    let region = |prefix: &str| -> BTreeSet<(usize, usize)> {
        positions
            .iter()
            .filter(|p| p.object_id.starts_with(prefix))
            .map(|p| (p.row, p.col))
            .collect()
    };
    let (a, b) = (region("a"), region("b"));
    println!("cluster a uses {} units, cluster b {}, shared {}", a.len(), b.len(), a.intersection(&b).count());

    let umatrix = compute_umatrix(&trained);
    let max = umatrix.iter().flatten().cloned().fold(0.0, f64::max);
    println!("U-matrix peak {max:.4}");
    for row in umatrix.iter().step_by(2) {
        let line: String = row
            .iter()
            .map(|&h| [' ', '.', ':', '*', '#'][((h / max) * 4.0).round() as usize])
            .collect();
        println!("|{line}|");
    }
    println!("{} bytes of map json", export_map(&trained, &positions).len());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
