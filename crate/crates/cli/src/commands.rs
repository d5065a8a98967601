//! One function per subcommand. Each loads its inputs, runs the library
//! operation, re-checks the postconditions, and emits a report carrying the
//! library version, the tolerances used and a `verified` block.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use majorize::channel::{
    detect_isometry, entropy_probe, mixed_unitary_uhlmann, pinch_convergence_experiment,
    pinch_table_csv, pinching_channel, random_isometric_channel, random_mixed_unitary_channel,
    structure_checks, uhlmann_channel, KrausChannel, CP_TOL, DEFAULT_ISOMETRY_TOL, FLAG_TOL,
};
use majorize::linalg::{
    isometry_deviation, random_unitary, ComplexMatrixRepr, HERMITIAN_TOL, UNITARY_TOL,
};
use majorize::sequence::{
    is_majorized, random_majorized_pair, shannon_entropy, ProbVector, CLAMP_TOL,
    DEFAULT_MAJORIZATION_TOL, NORMALIZATION_TOL,
};
use majorize::state::{
    random_density, spectrum, trace_distance, von_neumann_entropy, DensityMatrix, PSD_TOL,
    TRACE_TOL,
};
use majorize::transfer::{
    birkhoff_decompose, birkhoff_term_bound, chain_to_doubly_stochastic, find_transfer_chain,
    schur_horn_orthogonal, DoublyStochasticMatrix, DOUBLY_STOCHASTIC_TOL, ORTHOGONALITY_TOL,
};
use majorize::{ComplexMatrix, VERSION};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::io::{self, IoError};
use crate::{Command, GenArgs, GenKind, RunArgs, Status};

/// Round-trip tolerance for transfer chains and Schur–Horn diagonals.
const TRANSFER_TOL: f64 = 1e-9;
/// Trace-distance tolerance for the Uhlmann constructions.
const UHLMANN_TOL: f64 = 1e-7;
/// Final-row tolerance of the pinch-convergence table.
const PINCH_TOL: f64 = 1e-8;
const DEFAULT_TRIALS: usize = 1000;
const DEFAULT_DIM: usize = 4;
const DEFAULT_TERMS: usize = 3;

#[derive(Debug, Error)]
pub enum Failure {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Domain(#[from] majorize::Error),
}

impl Failure {
    pub fn status(&self) -> u8 {
        match self {
            Failure::Io(_) => 2,
            Failure::Domain(_) => 1,
        }
    }
}

type Outcome = Result<Status, Failure>;

pub fn dispatch(command: Command) -> Outcome {
    match command {
        Command::Entropy(a) => entropy(&a),
        Command::Majorize(a) => majorize_cmd(&a),
        Command::Transfer(a) => transfer(&a),
        Command::Birkhoff(a) => birkhoff(&a),
        Command::SchurHorn(a) => schur_horn(&a),
        Command::Uhlmann(a) => uhlmann(&a),
        Command::MixedUnitary(a) => mixed_unitary(&a),
        Command::PinchConverge(a) => pinch_converge(&a),
        Command::DetectIsometry(a) => detect(&a),
        Command::ProbeEntropy(a) => probe(&a),
        Command::Gen(a) => generate(&a),
    }
}

/// One loaded input: a whole file, or one member of a two-operand file.
struct Operand {
    value: Value,
    path: PathBuf,
    field: Option<&'static str>,
}

impl Operand {
    fn typed<T: DeserializeOwned>(&self) -> Result<T, IoError> {
        io::from_value(&self.value, &self.path).map_err(|e| match (e, self.field) {
            (
                IoError::Schema {
                    path,
                    field,
                    message,
                },
                Some(member),
            ) => IoError::Schema {
                path,
                field: if field == "." {
                    member.to_string()
                } else {
                    format!("{member}.{field}")
                },
                message,
            },
            (e, _) => e,
        })
    }

    fn is_vector(&self) -> bool {
        self.value.get("entries").is_some()
    }

    /// A vector, or the spectrum of a state.
    fn vector(&self) -> Result<ProbVector, Failure> {
        if self.is_vector() {
            Ok(self.typed()?)
        } else {
            Ok(spectrum(&self.typed::<DensityMatrix>()?)?)
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure::Io(IoError::Usage(message.into()))
}

fn single(args: &RunArgs) -> Result<Operand, Failure> {
    match args.inputs.as_slice() {
        [path] => Ok(Operand {
            value: io::load_value(path)?,
            path: path.clone(),
            field: None,
        }),
        other => Err(usage(format!(
            "expected exactly one --in, got {}",
            other.len()
        ))),
    }
}

/// Two operands, from two files or from one file holding `{"a","b"}` or
/// `{"rho1","rho2"}`.
fn pair(args: &RunArgs) -> Result<(Operand, Operand), Failure> {
    match args.inputs.as_slice() {
        [first, second] => Ok((
            Operand {
                value: io::load_value(first)?,
                path: first.clone(),
                field: None,
            },
            Operand {
                value: io::load_value(second)?,
                path: second.clone(),
                field: None,
            },
        )),
        [path] => {
            let value = io::load_value(path)?;
            for (x, y) in [("a", "b"), ("rho1", "rho2")] {
                if let (Some(vx), Some(vy)) = (value.get(x), value.get(y)) {
                    return Ok((
                        Operand {
                            value: vx.clone(),
                            path: path.clone(),
                            field: Some(x),
                        },
                        Operand {
                            value: vy.clone(),
                            path: path.clone(),
                            field: Some(y),
                        },
                    ));
                }
            }
            Err(IoError::Schema {
                path: path.clone(),
                field: ".".into(),
                message: "a single input must hold members \"a\"/\"b\" or \"rho1\"/\"rho2\"".into(),
            }
            .into())
        }
        other => Err(usage(format!(
            "expected one or two --in paths, got {}",
            other.len()
        ))),
    }
}

fn report(command: &str, body: Value, tolerances: Value, verified: Value) -> Value {
    let mut map = match body {
        Value::Object(map) => map,
        other => {
            let mut map = Map::new();
            map.insert("result".into(), other);
            map
        }
    };
    map.insert("command".into(), json!(command));
    map.insert("version".into(), json!(VERSION));
    map.insert("tolerances".into(), tolerances);
    map.insert("verified".into(), verified);
    Value::Object(map)
}

fn emit(args: &RunArgs, value: &Value) -> Result<(), Failure> {
    match &args.out {
        Some(path) => io::save_json(value, path)?,
        None => print!("{}", io::to_pretty(value)),
    }
    Ok(())
}

/// Emits the report; a failed postcondition turns into exit status 1.
fn finish(args: &RunArgs, value: Value, negative: bool) -> Outcome {
    emit(args, &value)?;
    let passed = value["verified"]["passed"].as_bool().unwrap_or(true);
    Ok(if negative || !passed {
        Status::Negative
    } else {
        Status::Success
    })
}

fn state_tolerances() -> Value {
    json!({"hermitian": HERMITIAN_TOL, "trace": TRACE_TOL, "psd": PSD_TOL})
}

fn max_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

fn entropy(args: &RunArgs) -> Outcome {
    let input = single(args)?;
    let value = if input.is_vector() {
        let p: ProbVector = input.typed()?;
        let h = shannon_entropy(&p)?;
        let mut verified = json!({"nonnegative": h >= 0.0});
        if p.is_normalized() {
            verified["at_most_log2_d"] = json!(h <= (p.len() as f64).log2() + 1e-12);
        }
        verified["passed"] = json!(verified
            .as_object()
            .unwrap()
            .values()
            .all(|v| v == &json!(true)));
        report(
            "entropy",
            json!({"shannon_bits": h}),
            json!({"clamp": CLAMP_TOL, "normalization": NORMALIZATION_TOL}),
            verified,
        )
    } else {
        let rho: DensityMatrix = input.typed()?;
        let s = von_neumann_entropy(&rho)?;
        let lambda = spectrum(&rho)?;
        let via_spectrum = shannon_entropy(&lambda)?;
        let in_range = s >= -1e-12 && s <= (rho.dim() as f64).log2() + 1e-9;
        let consistent = (s - via_spectrum).abs() <= 1e-9;
        report(
            "entropy",
            json!({"von_neumann_bits": s, "spectrum": lambda.entries()}),
            state_tolerances(),
            json!({
                "equals_shannon_of_spectrum": consistent,
                "within_zero_and_log2_d": in_range,
                "passed": consistent && in_range,
            }),
        )
    };
    finish(args, value, false)
}

fn majorize_cmd(args: &RunArgs) -> Outcome {
    let (a, b) = pair(args)?;
    let (a, b) = (a.vector()?, b.vector()?);
    let tol = args.tol.unwrap_or(DEFAULT_MAJORIZATION_TOL);
    let verdict = is_majorized(&a, &b, tol);
    let value = report(
        "majorize",
        serde_json::to_value(&verdict).expect("verdict serializes"),
        json!({"majorization": tol}),
        json!({"prefix_sums_compared": a.len().max(b.len())}),
    );
    finish(args, value, args.require && !verdict.holds)
}

fn transfer(args: &RunArgs) -> Outcome {
    let (a, b) = pair(args)?;
    let (a, b) = (a.vector()?, b.vector()?);
    let chain = find_transfer_chain(&a, &b)?;
    let q = chain_to_doubly_stochastic(&chain);
    let n = a.len().max(b.len());
    let target = a.padded(n).sort_desc();
    let source = b.padded(n).sort_desc();
    let error = max_diff(q.apply(&source)?.entries(), target.entries());
    let steps_ok = chain.len() <= n.saturating_sub(1);
    let value = report(
        "transfer",
        json!({"chain": chain, "doubly_stochastic": q}),
        json!({"round_trip": TRANSFER_TOL, "doubly_stochastic": DOUBLY_STOCHASTIC_TOL}),
        json!({
            "round_trip_error": error,
            "steps": chain.len(),
            "max_steps": n.saturating_sub(1),
            "row_column_deviation": q.deviation(),
            "passed": error <= TRANSFER_TOL && steps_ok && q.deviation() <= DOUBLY_STOCHASTIC_TOL,
        }),
    );
    finish(args, value, false)
}

fn birkhoff(args: &RunArgs) -> Outcome {
    let q: DoublyStochasticMatrix = single(args)?.typed()?;
    let tol = args.tol.unwrap_or(DOUBLY_STOCHASTIC_TOL);
    let dec = birkhoff_decompose(&q, tol)?;
    let error = dec.reconstruction_error(&q);
    let bound = birkhoff_term_bound(q.dim());
    let total = dec.total_weight();
    let value = report(
        "birkhoff",
        serde_json::to_value(&dec).expect("decomposition serializes"),
        json!({"birkhoff": tol, "reconstruction": 10.0 * tol}),
        json!({
            "reconstruction_error": error,
            "term_count": dec.len(),
            "term_bound": bound,
            "weight_total": total,
            "passed": error <= 10.0 * tol && dec.len() <= bound && (total - 1.0).abs() <= 10.0 * tol,
        }),
    );
    finish(args, value, false)
}

fn schur_horn(args: &RunArgs) -> Outcome {
    let (a, b) = pair(args)?;
    let (a, b) = (a.vector()?, b.vector()?);
    let u = schur_horn_orthogonal(&a, &b)?;
    let n = u.dim();
    let m = u.matrix();
    let spectrum = DMatrix::from_diagonal(&DVector::from_column_slice(
        b.padded(n).sort_desc().entries(),
    ));
    let diag: Vec<f64> = (m * spectrum * m.transpose())
        .diagonal()
        .iter()
        .copied()
        .collect();
    let error = max_diff(&diag, a.padded(n).sort_desc().entries());
    let orthogonality = (m.transpose() * m - DMatrix::identity(n, n)).abs().max();
    let value = report(
        "schur-horn",
        json!({"orthogonal": u}),
        json!({"diagonal": TRANSFER_TOL, "orthogonality": ORTHOGONALITY_TOL}),
        json!({
            "diagonal_error": error,
            "orthogonality_deviation": orthogonality,
            "passed": error <= TRANSFER_TOL && orthogonality <= ORTHOGONALITY_TOL,
        }),
    );
    finish(args, value, false)
}

fn states(args: &RunArgs) -> Result<(DensityMatrix, DensityMatrix), Failure> {
    let (first, second) = pair(args)?;
    Ok((first.typed()?, second.typed()?))
}

fn channel_tolerances(extra: Value) -> Value {
    let mut base = json!({"flags": FLAG_TOL, "completely_positive": CP_TOL});
    if let (Some(base), Value::Object(extra)) = (base.as_object_mut(), extra) {
        base.extend(extra);
    }
    base
}

fn uhlmann(args: &RunArgs) -> Outcome {
    let (rho1, rho2) = states(args)?;
    let psi = uhlmann_channel(&rho1, &rho2)?;
    let distance = trace_distance(&psi.apply(&rho2)?, &rho1)?;
    let structure = structure_checks(&psi)?;
    let passed = distance <= UHLMANN_TOL
        && structure.is_bistochastic()
        && structure.completely_positive.holds;
    let value = report(
        "uhlmann",
        json!({"channel": psi}),
        channel_tolerances(json!({"trace_distance": UHLMANN_TOL})),
        json!({"trace_distance": distance, "structure": structure, "passed": passed}),
    );
    finish(args, value, false)
}

fn mixed_unitary(args: &RunArgs) -> Outcome {
    let (rho1, rho2) = states(args)?;
    let mixture = mixed_unitary_uhlmann(&rho1, &rho2)?;
    let distance = trace_distance(&mixture.apply(&rho2)?, &rho1)?;
    let total: f64 = mixture.weights().iter().sum();
    let unitarity = mixture
        .terms
        .iter()
        .map(|t| isometry_deviation(&t.unitary))
        .fold(0.0, f64::max);
    let bound = birkhoff_term_bound(rho1.dim());
    let passed = distance <= UHLMANN_TOL
        && (total - 1.0).abs() <= 1e-9
        && unitarity <= 1e-8
        && mixture.terms.len() <= bound;
    let value = report(
        "mixed-unitary",
        serde_json::to_value(&mixture).expect("mixture serializes"),
        json!({"trace_distance": UHLMANN_TOL, "unitary": 1e-8, "weights": 1e-9}),
        json!({
            "trace_distance": distance,
            "weight_total": total,
            "max_unitarity_deviation": unitarity,
            "term_count": mixture.terms.len(),
            "term_bound": bound,
            "passed": passed,
        }),
    );
    finish(args, value, false)
}

fn sidecar(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn pinch_converge(args: &RunArgs) -> Outcome {
    let (rho, basis, basis_source) = match args.inputs.as_slice() {
        [state] => {
            let op = Operand {
                value: io::load_value(state)?,
                path: state.clone(),
                field: None,
            };
            let rho: DensityMatrix = op.typed()?;
            let d = rho.dim();
            (rho, ComplexMatrix::identity(d, d), "standard".to_string())
        }
        [state, basis] => {
            let op = Operand {
                value: io::load_value(state)?,
                path: state.clone(),
                field: None,
            };
            let rho: DensityMatrix = op.typed()?;
            let repr: ComplexMatrixRepr = io::load_json(basis)?;
            let matrix = repr.to_matrix().map_err(|e| IoError::Schema {
                path: basis.clone(),
                field: "rows".into(),
                message: e.to_string(),
            })?;
            (rho, matrix, basis.display().to_string())
        }
        other => {
            return Err(usage(format!(
                "expected a state and an optional basis, got {} inputs",
                other.len()
            )))
        }
    };
    let rows = pinch_convergence_experiment(&rho, &basis)?;
    let excess = rows
        .iter()
        .map(|r| r.trace_distance - r.bound)
        .fold(f64::NEG_INFINITY, f64::max);
    let final_distance = rows.last().map_or(0.0, |r| r.trace_distance);
    let within = excess <= PINCH_TOL;
    let converged = final_distance <= PINCH_TOL;
    let meta = report(
        "pinch-converge",
        json!({"rows": rows.len(), "basis": basis_source, "columns": ["n", "trace_distance", "bound"]}),
        json!({"bound_slack": PINCH_TOL, "final_distance": PINCH_TOL, "unitary": UNITARY_TOL}),
        json!({
            "max_distance_minus_bound": excess,
            "all_within_bound": within,
            "final_distance": final_distance,
            "final_within_tol": converged,
            "passed": within && converged,
        }),
    );
    let csv = pinch_table_csv(&rows);
    match &args.out {
        Some(path) => {
            io::save_text(&csv, path)?;
            io::save_json(&meta, &sidecar(path))?;
        }
        None => {
            print!("{csv}");
            eprint!("{}", io::to_pretty(&meta));
        }
    }
    Ok(if within && converged {
        Status::Success
    } else {
        Status::Negative
    })
}

fn detect(args: &RunArgs) -> Outcome {
    let channel: KrausChannel = single(args)?.typed()?;
    let tol = args.tol.unwrap_or(DEFAULT_ISOMETRY_TOL);
    let result = detect_isometry(&channel, tol)?;
    let positive = result.is_isometric_conjugation;
    let mut verified = json!({"kraus_terms": channel.kraus().len(), "trace_preserving": channel.flags().trace_preserving});
    if let Some(v) = &result.isometry {
        verified["isometry_deviation"] = json!(isometry_deviation(v));
    }
    let value = report(
        "detect-isometry",
        serde_json::to_value(&result).expect("report serializes"),
        json!({"isometry": tol}),
        verified,
    );
    finish(args, value, args.expect_isometry && !positive)
}

fn probe(args: &RunArgs) -> Outcome {
    let channel: KrausChannel = single(args)?.typed()?;
    let trials = args.trials.unwrap_or(DEFAULT_TRIALS);
    let d = args.d.unwrap_or(channel.input_dim());
    let result = entropy_probe(
        &channel,
        trials,
        d,
        &mut ChaCha8Rng::seed_from_u64(args.seed),
    )?;
    let mut body = serde_json::to_value(result).expect("report serializes");
    body["seed"] = json!(args.seed);
    let value = report(
        "probe-entropy",
        body,
        json!({"flags": FLAG_TOL}),
        json!({"trace_preserving": channel.flags().trace_preserving, "dimension": d, "states_full_rank": true}),
    );
    finish(args, value, false)
}

fn generate(g: &GenArgs) -> Outcome {
    let args = &g.run;
    let d = args.d.unwrap_or(DEFAULT_DIM);
    if d == 0 {
        return Err(usage("--d must be at least 1"));
    }
    let terms = g.terms.unwrap_or(DEFAULT_TERMS);
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let kind = g
        .kind
        .to_possible_value()
        .expect("no skipped variants")
        .get_name()
        .to_string();

    let (body, verified) = match g.kind {
        GenKind::Pair => {
            let (a, b) = random_majorized_pair(d, &mut rng)?;
            let holds = is_majorized(&a, &b, DEFAULT_MAJORIZATION_TOL).holds;
            (
                json!({"a": a, "b": b}),
                json!({"majorized": holds, "passed": holds}),
            )
        }
        GenKind::State => {
            let rho = random_density(d, &mut rng, None)?;
            (
                serde_json::to_value(&rho).expect("state serializes"),
                json!({"valid_state": true}),
            )
        }
        GenKind::StatePair => {
            let (a, b) = random_majorized_pair(d, &mut rng)?;
            let rho1 = random_density(d, &mut rng, Some(&a))?;
            let rho2 = random_density(d, &mut rng, Some(&b))?;
            let holds = is_majorized(
                &spectrum(&rho1)?,
                &spectrum(&rho2)?,
                DEFAULT_MAJORIZATION_TOL,
            )
            .holds;
            (
                json!({"rho1": rho1, "rho2": rho2}),
                json!({"majorized": holds, "passed": holds}),
            )
        }
        GenKind::DoublyStochastic => {
            let (a, b) = random_majorized_pair(d, &mut rng)?;
            let q = chain_to_doubly_stochastic(&find_transfer_chain(&a, &b)?);
            let deviation = q.deviation();
            (
                serde_json::to_value(&q).expect("matrix serializes"),
                json!({"row_column_deviation": deviation, "passed": deviation <= DOUBLY_STOCHASTIC_TOL}),
            )
        }
        GenKind::MixedUnitaryChannel => {
            let channel = random_mixed_unitary_channel(d, terms.max(1), &mut rng)?;
            let ok = channel.is_bistochastic();
            (
                serde_json::to_value(&channel).expect("channel serializes"),
                json!({"bistochastic": ok, "passed": ok}),
            )
        }
        GenKind::IsometricChannel => {
            let d_out = g.d_out.unwrap_or(d);
            if d_out < d {
                return Err(usage("--d-out must be at least --d for an isometry"));
            }
            let (channel, v) = random_isometric_channel(d, d_out, terms.max(1), &mut rng)?;
            let deviation = isometry_deviation(&v);
            let mut body = serde_json::to_value(&channel).expect("channel serializes");
            body["isometry"] =
                serde_json::to_value(ComplexMatrixRepr::from(&v)).expect("matrix serializes");
            (
                body,
                json!({"isometry_deviation": deviation, "passed": deviation <= 1e-9}),
            )
        }
        GenKind::DephasingChannel => {
            let channel = pinching_channel(&random_unitary(d, &mut rng))?;
            let ok = channel.is_bistochastic();
            (
                serde_json::to_value(&channel).expect("channel serializes"),
                json!({"bistochastic": ok, "passed": ok}),
            )
        }
    };
    let mut value = report(
        "gen",
        body,
        json!({"majorization": DEFAULT_MAJORIZATION_TOL, "flags": FLAG_TOL}),
        verified,
    );
    // Generated objects stay loadable as inputs, so metadata lives under its
    // own key instead of clashing with fields such as `kind` or `d`.
    value["generator"] = json!({"kind": kind, "seed": args.seed, "d": d, "terms": terms});
    finish(args, value, false)
}
