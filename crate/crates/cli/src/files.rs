//! Loading inputs with the file path attached to every error.

use std::path::Path;

use rdexplain::io::read_vectors;
use rdexplain::{Error, GaussianReference, NeuralNetwork};

use crate::{CliResult, Failure, Problem};

fn read(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

/// Attaches the path (and the line, for JSON syntax errors) to a load error.
fn located(path: &Path, e: Error) -> Failure {
    let name = path.display();
    let mut f = Failure::from(match e {
        Error::Json(j) => {
            return Failure::usage(format!("{name}:{}: {j}", j.line()));
        }
        other => other,
    });
    f.message = format!("{name}: {}", f.message);
    f
}

pub fn load_network(path: &Path) -> CliResult<NeuralNetwork> {
    NeuralNetwork::from_json(&read(path)?).map_err(|e| located(path, e))
}

pub fn load_stats(path: &Path) -> CliResult<GaussianReference> {
    GaussianReference::from_json(&read(path)?).map_err(|e| located(path, e))
}

pub fn load_vectors(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    read_vectors(path).map_err(|e| located(path, e))
}

pub fn write(path: &Path, bytes: impl AsRef<[u8]>) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

/// Network, reference and the selected input rows with their indices.
pub struct Loaded {
    pub net: NeuralNetwork,
    pub reference: GaussianReference,
    pub rows: Vec<(usize, Vec<f64>)>,
    pub total_rows: usize,
}

pub fn load_problem(p: &Problem) -> CliResult<Loaded> {
    let net = load_network(&p.network)?;
    let reference = load_stats(&p.stats)?;
    let all = load_vectors(&p.input)?;
    let d = net.input_dim();
    if reference.dim() != d {
        return Err(Failure::check(format!(
            "{}: reference has dimension {}, network expects {d}",
            p.stats.display(),
            reference.dim()
        )));
    }
    if let Some((i, v)) = all.iter().enumerate().find(|(_, v)| v.len() != d) {
        return Err(Failure::check(format!(
            "{}: row {i} has {} components, network expects {d}",
            p.input.display(),
            v.len()
        )));
    }
    let total_rows = all.len();
    let rows = match p.row {
        Some(r) if r >= total_rows => {
            return Err(Failure::check(format!(
                "{}: row {r} out of range ({total_rows} rows)",
                p.input.display()
            )))
        }
        Some(r) => vec![(r, all[r].clone())],
        None => all.into_iter().enumerate().collect(),
    };
    Ok(Loaded {
        net,
        reference,
        rows,
        total_rows,
    })
}
