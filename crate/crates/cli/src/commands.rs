//! One function per subcommand. Each returns the value to serialize.

use std::path::Path;

use mueller_core::json::{matrix_to_json, to_canonical_string, KJson, StokesJson};
use mueller_core::littlegroup::{sample_little, LittleKind};
use mueller_core::lorentz::is_lorentz_with;
use mueller_core::oracle::{
    consistent_instance, generic_instance, random_lorentz_rng, rng_for, rotation_instance, ConsistentOptions, Instance,
    CHI_MAX,
};
use mueller_core::quadform::{analyze, QuadFormReport};
use mueller_core::solver3::{family_3d, solve_two_3d, GammaExpression};
use mueller_core::solver4::{
    family_4d, quad_coeffs, solve_four_with, solve_six_with, ExpansionCoeffs, FourOptions, SixOptions,
};
use mueller_core::{apply, ComplexParameter, MeasurementPair, MuellerMatrix};
use serde::Serialize;

use crate::dataset::{dataset_from_csv, read_dataset, read_matrix, read_stokes, Dataset};
use crate::error::CliError;
use crate::GenKind;

type Json = serde_json::Value;

fn to_json<T: Serialize>(v: &T) -> Json {
    serde_json::to_value(v).expect("reports serialize")
}

/// Transitivity residual of `l` on every pair.
fn residuals(l: &MuellerMatrix, pairs: &[MeasurementPair]) -> Vec<f64> {
    pairs
        .iter()
        .map(|p| l.transitivity_residual(&p.input, &p.output))
        .collect()
}

fn worst(r: &[f64]) -> f64 {
    r.iter().copied().fold(0.0, f64::max)
}

fn need_pairs(data: &Dataset, count: usize) -> Result<(), CliError> {
    if data.pairs.len() == count {
        Ok(())
    } else {
        Err(CliError::Input(format!(
            "expected {count} measurement pairs, found {}",
            data.pairs.len()
        )))
    }
}

fn need_some(data: &Dataset) -> Result<(), CliError> {
    if data.pairs.is_empty() {
        Err(CliError::Input("dataset holds no measurement pairs".into()))
    } else {
        Ok(())
    }
}

pub fn apply_cmd(matrix: &Path, stokes: &Path) -> Result<Json, CliError> {
    let l = read_matrix(matrix)?;
    let s = read_stokes(stokes)?;
    Ok(to_json(&StokesJson::from(apply(&l, &s))))
}

#[derive(Serialize)]
struct Family3Record {
    index: usize,
    gamma: f64,
    alpha: f64,
    beta: f64,
    n0: f64,
    n: [f64; 3],
    k: KJson,
    mueller: Vec<f64>,
    residual: f64,
}

pub fn family3_cmd(data: &Path, gamma: f64) -> Result<Json, CliError> {
    let data = read_dataset(data)?;
    need_some(&data)?;
    let mut out = Vec::new();
    for (index, p) in data.pairs.iter().enumerate() {
        let f = family_3d(p, gamma)?;
        let l = f.mueller();
        out.push(Family3Record {
            index,
            gamma: f.gamma,
            alpha: f.alpha,
            beta: f.beta,
            n0: f.n0,
            n: f.n.into(),
            k: f.k().into(),
            mueller: matrix_to_json(&l),
            residual: l.transitivity_residual(&p.input, &p.output),
        });
    }
    Ok(to_json(&out))
}

#[derive(Serialize)]
struct Solve2Report {
    gamma: f64,
    n0: f64,
    n: [f64; 3],
    k: KJson,
    mueller: Vec<f64>,
    residuals: Vec<f64>,
    worst: f64,
    consistency_residual: f64,
    expressions: [GammaExpression; 4],
    chosen: usize,
    expression_spread: f64,
    direction_residuals: [f64; 2],
}

pub fn solve2_cmd(data: &Path) -> Result<Json, CliError> {
    let data = read_dataset(data)?;
    need_pairs(&data, 2)?;
    let fit = solve_two_3d(&data.pairs[0], &data.pairs[1])?;
    let l = fit.solution.mueller();
    let res = residuals(&l, &data.pairs);
    Ok(to_json(&Solve2Report {
        gamma: fit.solution.gamma,
        n0: fit.solution.n0,
        n: fit.solution.n.into(),
        k: fit.solution.k().into(),
        mueller: matrix_to_json(&l),
        worst: worst(&res),
        residuals: res,
        consistency_residual: fit.consistency_residual,
        expressions: fit.expressions,
        chosen: fit.chosen,
        expression_spread: fit.expression_spread,
        direction_residuals: fit.residuals,
    }))
}

#[derive(Serialize)]
struct Family4Root {
    expansion: ExpansionCoeffs,
    k: KJson,
    mueller: Vec<f64>,
    residual: f64,
}

#[derive(Serialize)]
struct Family4Record {
    index: usize,
    roots: Vec<Family4Root>,
}

pub fn family4_cmd(data: &Path, y: f64, z: f64, w: f64) -> Result<Json, CliError> {
    let data = read_dataset(data)?;
    need_some(&data)?;
    let mut out = Vec::new();
    for (index, p) in data.pairs.iter().enumerate() {
        let roots = family_4d(p, y, z, w)?
            .into_iter()
            .map(|r| Family4Root {
                expansion: r.expansion,
                k: r.k.into(),
                mueller: matrix_to_json(&r.mueller),
                residual: r.residual,
            })
            .collect();
        out.push(Family4Record { index, roots });
    }
    Ok(to_json(&out))
}

pub fn solve4_cmd(data: &Path, opts: &FourOptions) -> Result<Json, CliError> {
    let data = read_dataset(data)?;
    log::info!("solve4: {} starts, seed {}", opts.starts, opts.seed);
    let report = solve_four_with(&data.pairs, opts)?;
    log::info!("solve4: {} of {} starts converged", report.converged, report.starts);
    let json = to_json(&report);
    if report.validated {
        Ok(json)
    } else {
        Err(CliError::Rejected {
            message: format!("no root reproduces all pairs within {:e}", opts.tol_valid),
            report: json,
        })
    }
}

pub fn solve6_cmd(data: &Path, opts: &SixOptions) -> Result<Json, CliError> {
    let data = read_dataset(data)?;
    let report = solve_six_with(&data.pairs, opts)?;
    log::info!("solve6: condition number {:e}", report.diagnostics.condition_number);
    Ok(to_json(&report))
}

#[derive(Serialize)]
struct DiagRecord {
    index: usize,
    signature: String,
    #[serde(flatten)]
    report: QuadFormReport,
}

pub fn diag_cmd(data: &Path) -> Result<Json, CliError> {
    let data = read_dataset(data)?;
    need_some(&data)?;
    let mut out = Vec::new();
    for (index, p) in data.pairs.iter().enumerate() {
        let report = analyze(&quad_coeffs(p)?);
        out.push(DiagRecord {
            index,
            signature: report.conditions.signature.to_string(),
            report,
        });
    }
    Ok(to_json(&out))
}

#[derive(Serialize)]
struct ElementRecord {
    k: KJson,
    mueller: Vec<f64>,
    residual: f64,
}

#[derive(Serialize)]
struct LittleReport {
    source: StokesJson,
    kind: LittleKind,
    elements: Vec<ElementRecord>,
}

pub fn little_cmd(stokes: &Path, count: usize, seed: u64) -> Result<Json, CliError> {
    let s = read_stokes(stokes)?;
    let batch = sample_little(&s, count, seed);
    let elements = batch
        .iter()
        .map(|el| ElementRecord {
            k: el.k.into(),
            mueller: matrix_to_json(&el.mueller()),
            residual: el.residual(),
        })
        .collect();
    Ok(to_json(&LittleReport {
        source: s.into(),
        kind: mueller_core::littlegroup::kind_of(&s),
        elements,
    }))
}

#[derive(Serialize)]
struct Device {
    k: KJson,
    mueller: Vec<f64>,
}

impl Device {
    fn new(k: &ComplexParameter, l: &MuellerMatrix) -> Self {
        Self {
            k: (*k).into(),
            mueller: matrix_to_json(l),
        }
    }
}

pub struct GenRequest<'a> {
    pub kind: Option<GenKind>,
    pub seed: u64,
    pub count: Option<usize>,
    pub truth: Option<&'a Path>,
    pub from_csv: Option<&'a Path>,
}

fn write_truth(path: Option<&Path>, inst: &Instance) -> Result<(), CliError> {
    if let Some(path) = path {
        let text = to_canonical_string(&Device::new(&inst.k, &inst.mueller)).expect("devices serialize");
        std::fs::write(path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn generated(name: &str, seed: u64, inst: &Instance) -> Json {
    let data = Dataset::new(inst.pairs.clone())
        .with_meta("generator", name)
        .with_meta("seed", seed)
        .with_meta("count", inst.pairs.len());
    to_json(&data)
}

pub fn gen_cmd(req: &GenRequest) -> Result<Json, CliError> {
    if let Some(csv) = req.from_csv {
        return Ok(to_json(&dataset_from_csv(csv)?));
    }
    let kind = req
        .kind
        .ok_or_else(|| CliError::Input("gen needs a kind or --from-csv".into()))?;
    let seed = req.seed;
    if kind == GenKind::Lorentz && req.truth.is_some() {
        return Err(CliError::Input("--truth does not apply to `gen lorentz`".into()));
    }
    match kind {
        GenKind::Lorentz => {
            let devices: Vec<Device> = (0..req.count.unwrap_or(1))
                .map(|i| {
                    let (k, l) = random_lorentz_rng(&mut rng_for(seed, i as u64), CHI_MAX);
                    Device::new(&k, &l)
                })
                .collect();
            Ok(to_json(&devices))
        }
        GenKind::Rotation => {
            if req.count.is_some_and(|c| c != 2) {
                return Err(CliError::Input("rotation datasets always hold 2 pairs".into()));
            }
            let inst = rotation_instance(seed);
            write_truth(req.truth, &inst)?;
            Ok(generated("rotation", seed, &inst))
        }
        GenKind::Consistent => {
            let opts = ConsistentOptions {
                count: req.count.unwrap_or(6),
                ..ConsistentOptions::default()
            };
            let set = consistent_instance(seed, &opts).ok_or_else(|| CliError::Rejected {
                message: format!("no consistent {}-pair set found for seed {seed}", opts.count),
                report: Json::Null,
            })?;
            write_truth(req.truth, &set.instance)?;
            Ok(generated("consistent", seed, &set.instance))
        }
        GenKind::Generic => {
            let inst = generic_instance(seed, req.count.unwrap_or(6), CHI_MAX);
            write_truth(req.truth, &inst)?;
            Ok(generated("generic", seed, &inst))
        }
    }
}

#[derive(Serialize)]
struct VerifyRow {
    index: usize,
    residual: f64,
    pass: bool,
}

#[derive(Serialize)]
struct LorentzCheck {
    is_lorentz: bool,
    metric_residual: f64,
    det_residual: f64,
}

#[derive(Serialize)]
struct VerifyReport {
    pairs: Vec<VerifyRow>,
    worst: f64,
    tolerance: f64,
    lorentz: LorentzCheck,
    pass: bool,
}

pub fn verify_cmd(matrix: &Path, data: &Path, tol: f64) -> Result<Json, CliError> {
    let l = read_matrix(matrix)?;
    let data = read_dataset(data)?;
    let res = residuals(&l, &data.pairs);
    let rows: Vec<VerifyRow> = res
        .iter()
        .enumerate()
        .map(|(index, &residual)| VerifyRow {
            index,
            residual,
            pass: residual <= tol,
        })
        .collect();
    let lr = is_lorentz_with(&l, tol);
    let pass = rows.iter().all(|r| r.pass);
    let report = to_json(&VerifyReport {
        pairs: rows,
        worst: worst(&res),
        tolerance: tol,
        lorentz: LorentzCheck {
            is_lorentz: lr.is_lorentz,
            metric_residual: lr.metric_residual,
            det_residual: lr.det_residual,
        },
        pass,
    });
    if pass {
        Ok(report)
    } else {
        Err(CliError::Rejected {
            message: format!("worst residual {:e} exceeds {tol:e}", worst(&res)),
            report,
        })
    }
}
