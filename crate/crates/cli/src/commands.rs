use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use surveykit::catalog::{run_verification, EstimatorId, GroundTruthMode, VerificationReport, VerifyTolerance};
use surveykit::estimators::{FamilyConfig, KValue, ParamAtom, Sign};
use surveykit::population::{
    compute_moments, finite_factors, generate_synthetic, load_population, save_population, FiniteFactors,
    FinitePopulation, PopulationMoments, SyntheticSpec,
};
use surveykit::theory::{
    min_mse_tp, min_mse_tpd, mse_mean, pre_percent, theory_t1, theory_t2, theory_tp, theory_tpd, TheoryInput,
};
use surveykit::weights::{solve_weights, solve_weights_two_phase};
use surveykit::Error;

use crate::args::{
    Command, DesignArgs, Family, FamilyArgs, Format, GenerateArgs, MembersArgs, Mode, OutputArgs, ParamsArgs,
    SourceArgs, VerifyArgs, WeightsArgs,
};
use crate::config::{FileConfig, KSpec};
use crate::format::{fmt_g, fmt_opt, Table};
use crate::CliError;

/// Default Monte Carlo replicate count.
pub const DEFAULT_REPS: u64 = 100_000;

/// Distinct `(K1, K3)` rows of the appendix tables, in order of first appearance.
pub const APPENDIX_GRID: [(&str, &str); 24] = [
    ("unity", "C_x"),
    ("unity", "beta2_x"),
    ("beta2_x", "C_x"),
    ("C_x", "beta2_x"),
    ("unity", "rho_yx"),
    ("N_Xbar", "S_x"),
    ("N_Xbar", "f"),
    ("beta2_x", "K_x"),
    ("N", "K_x"),
    ("N", "unity"),
    ("N", "C_x"),
    ("N", "rho_yx"),
    ("N", "S_x"),
    ("N", "f"),
    ("N", "g"),
    ("n", "rho_yx"),
    ("n", "S_x"),
    ("n", "f"),
    ("n", "g"),
    ("n", "K_x"),
    ("beta2_x", "Xbar"),
    ("N_Xbar", "Xbar"),
    ("N", "Xbar"),
    ("n", "Xbar"),
];

pub fn dispatch(command: Command, stdout: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Params(a) => params(&a, stdout),
        Command::Members(a) => members(&a, stdout),
        Command::Weights(a) => weights(&a, stdout),
        Command::Verify(a) => verify(&a, stdout),
        Command::Generate(a) => generate(&a, stdout),
    }
}

fn read_synthetic(arg: &str) -> Result<SyntheticSpec, CliError> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        let path = Path::new(arg);
        std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?
    };
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid synthetic spec: {e}")))
}

fn load_pop_file(path: &Path) -> Result<FinitePopulation, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    load_population(file).map_err(|source| CliError::Input {
        path: path.to_path_buf(),
        source,
    })
}

fn load_source(src: &SourceArgs, file: &FileConfig) -> Result<FinitePopulation, CliError> {
    if let Some(path) = &src.pop {
        return load_pop_file(path);
    }
    if let Some(spec) = &src.synthetic {
        return Ok(generate_synthetic(&read_synthetic(spec)?)?);
    }
    if let Some(path) = &file.pop {
        return load_pop_file(path);
    }
    if let Some(spec) = &file.synthetic {
        return Ok(generate_synthetic(spec)?);
    }
    Err(CliError::Usage("a population is required: pass --pop or --synthetic".into()))
}

struct Design {
    n: Option<usize>,
    n_prime: Option<usize>,
}

impl Design {
    fn from(args: &DesignArgs, file: &FileConfig) -> Self {
        Self {
            n: args.n.or(file.n),
            n_prime: args.n_prime.or(file.n_prime),
        }
    }

    fn require_n(&self) -> Result<usize, CliError> {
        self.n
            .ok_or_else(|| CliError::Usage("the sample size --n is required".into()))
    }

    fn factors(&self, pop_size: usize) -> Result<FiniteFactors, CliError> {
        Ok(finite_factors(pop_size, self.require_n()?, self.n_prime)?)
    }
}

fn kvalue(flag: Option<KValue>, file: &Option<KSpec>, default: f64) -> Result<KValue, CliError> {
    match (flag, file) {
        (Some(v), _) => Ok(v),
        (None, Some(spec)) => spec.to_kvalue(),
        (None, None) => Ok(KValue::Literal(default)),
    }
}

fn family_config(
    f: &FamilyArgs,
    file: &FileConfig,
    m: &PopulationMoments,
    factors: &FiniteFactors,
) -> Result<FamilyConfig, CliError> {
    let d = FamilyConfig::default();
    let resolve = |flag, spec, default| kvalue(flag, spec, default).map(|k| k.resolve(m, factors));
    Ok(FamilyConfig {
        k1: resolve(f.k1, &file.k1, d.k1)?,
        k2: f.k2.or(file.k2).unwrap_or(d.k2),
        k3: resolve(f.k3, &file.k3, d.k3)?,
        k4: resolve(f.k4, &file.k4, d.k4)?,
        k5: resolve(f.k5, &file.k5, d.k5)?,
        alpha: f.alpha.or(file.alpha).unwrap_or(d.alpha),
        beta: f.beta.or(file.beta).unwrap_or(d.beta),
        lambda: f.lambda.or(file.lambda).unwrap_or(d.lambda),
        m: f.m.or(file.m).unwrap_or(d.m),
        q: f.q.or(file.q).unwrap_or(d.q),
        gamma: f.gamma.or(file.gamma).unwrap_or(d.gamma),
    })
}

struct Output {
    format: Format,
    out: Option<PathBuf>,
}

impl Output {
    fn from(args: &OutputArgs, file: &FileConfig) -> Self {
        Self {
            format: args.format.or(file.format).unwrap_or(Format::Markdown),
            out: args.out.clone().or_else(|| file.out.clone()),
        }
    }

    fn emit<T: Serialize>(&self, report: &T, table: &Table, stdout: &mut dyn Write) -> Result<(), CliError> {
        let mut buf = Vec::new();
        match self.format {
            Format::Json => {
                serde_json::to_writer_pretty(&mut buf, report).map_err(|e| CliError::Output(e.to_string()))?;
                buf.push(b'\n');
            }
            Format::Csv => table.write_csv(&mut buf)?,
            Format::Markdown => table.write_markdown(&mut buf).map_err(|e| CliError::Output(e.to_string()))?,
        }
        match &self.out {
            Some(path) => std::fs::write(path, &buf).map_err(|e| CliError::io(path, e)),
            None => stdout.write_all(&buf).map_err(|e| CliError::Output(e.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsReport {
    pub pop_size: usize,
    pub n: Option<usize>,
    pub n_prime: Option<usize>,
    pub ybar: f64,
    pub xbar: f64,
    pub sy: f64,
    pub sx: f64,
    pub cy: f64,
    pub cx: f64,
    pub rho: f64,
    pub kx: f64,
    pub beta2x: f64,
    pub f1: Option<f64>,
    pub f2: Option<f64>,
    pub f3: Option<f64>,
}

fn params(a: &ParamsArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let file = FileConfig::load_optional(a.source.config.as_deref())?;
    let pop = load_source(&a.source, &file)?;
    let m = compute_moments(&pop)?;
    let design = Design::from(&a.design, &file);
    if design.n.is_none() && design.n_prime.is_some() {
        return Err(CliError::Usage("--n-prime needs --n".into()));
    }
    let factors = design.n.map(|_| design.factors(pop.len())).transpose()?;
    let report = ParamsReport {
        pop_size: m.pop_size,
        n: design.n,
        n_prime: design.n_prime,
        ybar: m.ybar,
        xbar: m.xbar,
        sy: m.sy(),
        sx: m.sx(),
        cy: m.cy,
        cx: m.cx,
        rho: m.rho,
        kx: m.kx,
        beta2x: m.beta2x,
        f1: factors.map(|f| f.f1),
        f2: factors.and_then(|f| f.f2().ok()),
        f3: factors.and_then(|f| f.f3().ok()),
    };

    let mut t = Table::new(["parameter", "value"]);
    let mut row = |name: &str, v: String| t.push(vec![name.to_string(), v]);
    row("N", report.pop_size.to_string());
    if let Some(n) = report.n {
        row("n", n.to_string());
    }
    if let Some(np) = report.n_prime {
        row("n'", np.to_string());
    }
    for (name, v) in [
        ("Ybar", report.ybar),
        ("Xbar", report.xbar),
        ("S_y", report.sy),
        ("S_x", report.sx),
        ("C_y", report.cy),
        ("C_x", report.cx),
        ("rho_yx", report.rho),
        ("K_x", report.kx),
        ("beta2_x", report.beta2x),
    ] {
        row(name, fmt_g(v));
    }
    for (name, v) in [("f1", report.f1), ("f2", report.f2), ("f3", report.f3)] {
        if let Some(v) = v {
            row(name, fmt_g(v));
        }
    }
    Output::from(&a.output, &file).emit(&report, &t, stdout)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberCell {
    pub k2: Option<Sign>,
    pub pre: Option<f64>,
    /// Why `pre` is absent.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberRow {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub lambda: Option<f64>,
    /// `K1` (first family) or `K4` (second family).
    pub k_scale: ParamAtom,
    /// `K3` (first family) or `K5` (second family).
    pub k_shift: ParamAtom,
    pub cells: Vec<MemberCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembersReport {
    pub family: Family,
    pub pop_size: usize,
    pub n: usize,
    pub mse_mean: f64,
    pub rows: Vec<MemberRow>,
}

fn parse_atoms(names: &[String]) -> Result<Vec<ParamAtom>, CliError> {
    names
        .iter()
        .map(|s| s.parse::<ParamAtom>().map_err(CliError::Usage))
        .collect()
}

/// Cartesian product of two atom lists, or the appendix grid when both are empty.
fn atom_pairs(scale: &[String], shift: &[String], names: (&str, &str)) -> Result<Vec<(ParamAtom, ParamAtom)>, CliError> {
    let pairs: Vec<(ParamAtom, ParamAtom)> = if scale.is_empty() && shift.is_empty() {
        APPENDIX_GRID
            .iter()
            .map(|(a, b)| Ok((a.parse().map_err(CliError::Usage)?, b.parse().map_err(CliError::Usage)?)))
            .collect::<Result<_, CliError>>()?
    } else {
        let (xs, ys) = (parse_atoms(scale)?, parse_atoms(shift)?);
        if xs.is_empty() || ys.is_empty() {
            return Err(Error::InvalidGrid(format!("both {} and {} atom lists are needed", names.0, names.1)).into());
        }
        xs.iter().flat_map(|&x| ys.iter().map(move |&y| (x, y))).collect()
    };
    let mut seen = Vec::with_capacity(pairs.len());
    for p in pairs {
        if !seen.contains(&p) {
            seen.push(p);
        }
    }
    Ok(seen)
}

fn pick<T: Clone>(flag: &[T], file: &[T], default: &[T]) -> Vec<T> {
    if !flag.is_empty() {
        flag.to_vec()
    } else if !file.is_empty() {
        file.to_vec()
    } else {
        default.to_vec()
    }
}

/// Analytic PRE of one member, or the reason it is not defined.
fn member_cell(k2: Option<Sign>, cfg: FamilyConfig, m: &PopulationMoments, factors: &FiniteFactors, family: Family) -> MemberCell {
    let na = |note: &str| MemberCell {
        k2,
        pre: None,
        note: Some(note.to_string()),
    };
    let input = match cfg
        .validate_for(m.xbar)
        .and_then(|_| TheoryInput::new(*m, *factors, cfg))
    {
        Ok(input) => input,
        Err(Error::NonPositiveBase(_)) => return na("n/a(non-positive base)"),
        Err(_) => return na("n/a(degenerate)"),
    };
    let mse = match family {
        Family::T1 => theory_t1(&input).mse,
        Family::T2 => theory_t2(&input).mse,
    };
    match pre_percent(mse_mean(m, factors), mse) {
        Ok(pre) => MemberCell { k2, pre: Some(pre), note: None },
        Err(_) => na("n/a(zero mse)"),
    }
}

fn members(a: &MembersArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let file = FileConfig::load_optional(a.source.config.as_deref())?;
    let pop = load_source(&a.source, &file)?;
    let m = compute_moments(&pop)?;
    let design = Design::from(&a.design, &file);
    if design.n_prime.is_some() {
        return Err(CliError::Usage("members tables are single-phase; drop --n-prime".into()));
    }
    let factors = design.factors(pop.len())?;
    let grid = file.grid.clone().unwrap_or_default();
    let family = a.family.or(file.family).unwrap_or(Family::T1);
    let base = FamilyConfig::default();
    let mut rows = Vec::new();
    let mut table;

    match family {
        Family::T1 => {
            let pairs = atom_pairs(
                &pick(&a.k1_atoms, &grid.k1_atoms, &[]),
                &pick(&a.k3_atoms, &grid.k3_atoms, &[]),
                ("K1", "K3"),
            )?;
            let signs = pick(&a.k2_values, &grid.k2_values, &[Sign::Plus, Sign::Minus]);
            let mut uniq_signs: Vec<Sign> = Vec::new();
            for s in signs {
                if !uniq_signs.contains(&s) {
                    uniq_signs.push(s);
                }
            }
            let alphas = pick(&a.alpha, &grid.alpha, &[1.0]);
            let mut headers = vec!["alpha".to_string(), "K1".into(), "K3".into()];
            headers.extend(uniq_signs.iter().map(|s| format!("PRE K2={s}")));
            table = Table::new(headers);
            for &alpha in &alphas {
                for &(k1, k3) in &pairs {
                    let cells: Vec<MemberCell> = uniq_signs
                        .iter()
                        .map(|&k2| {
                            let cfg = FamilyConfig {
                                k1: k1.resolve(&m, &factors),
                                k2,
                                k3: k3.resolve(&m, &factors),
                                alpha,
                                ..base
                            };
                            member_cell(Some(k2), cfg, &m, &factors, family)
                        })
                        .collect();
                    rows.push(MemberRow {
                        alpha: Some(alpha),
                        beta: None,
                        lambda: None,
                        k_scale: k1,
                        k_shift: k3,
                        cells,
                    });
                }
            }
        }
        Family::T2 => {
            let pairs = atom_pairs(
                &pick(&a.k4_atoms, &grid.k4_atoms, &[]),
                &pick(&a.k5_atoms, &grid.k5_atoms, &[]),
                ("K4", "K5"),
            )?;
            let betas = pick(&a.beta, &grid.beta, &[-1.0]);
            let lambdas = pick(&a.lambda, &grid.lambda, &[-1.0]);
            table = Table::new(["beta", "lambda", "K4", "K5", "PRE"]);
            for &beta in &betas {
                for &lambda in &lambdas {
                    for &(k4, k5) in &pairs {
                        let cfg = FamilyConfig {
                            k4: k4.resolve(&m, &factors),
                            k5: k5.resolve(&m, &factors),
                            beta,
                            lambda,
                            ..base
                        };
                        rows.push(MemberRow {
                            alpha: None,
                            beta: Some(beta),
                            lambda: Some(lambda),
                            k_scale: k4,
                            k_shift: k5,
                            cells: vec![member_cell(None, cfg, &m, &factors, family)],
                        });
                    }
                }
            }
        }
    }

    for r in &rows {
        let mut line = match family {
            Family::T1 => vec![fmt_opt(r.alpha)],
            Family::T2 => vec![fmt_opt(r.beta), fmt_opt(r.lambda)],
        };
        line.push(r.k_scale.to_string());
        line.push(r.k_shift.to_string());
        line.extend(r.cells.iter().map(|c| match (c.pre, &c.note) {
            (Some(p), _) => fmt_g(p),
            (None, Some(note)) => note.clone(),
            (None, None) => "n/a".into(),
        }));
        table.push(line);
    }
    let report = MembersReport {
        family,
        pop_size: pop.len(),
        n: factors.n,
        mse_mean: mse_mean(&m, &factors),
        rows,
    };
    Output::from(&a.output, &file).emit(&report, &table, stdout)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsReport {
    pub n: usize,
    pub n_prime: Option<usize>,
    pub config: FamilyConfig,
    pub weights: [f64; 3],
    pub residual_sum: f64,
    pub residual_opt: f64,
    pub residual_bias: f64,
    pub condition_estimate: f64,
    pub bias: f64,
    pub mse: f64,
    pub min_mse: f64,
    pub mse_mean: f64,
    pub pre: Option<f64>,
}

fn weights(a: &WeightsArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let file = FileConfig::load_optional(a.source.config.as_deref())?;
    let pop = load_source(&a.source, &file)?;
    let m = compute_moments(&pop)?;
    let factors = Design::from(&a.design, &file).factors(pop.len())?;
    let cfg = family_config(&a.family, &file, &m, &factors)?;
    let input = TheoryInput::new(m, factors, cfg)?;
    let two_phase = factors.is_two_phase();
    let (sol, theory, min_mse) = if two_phase {
        let sol = solve_weights_two_phase(&input)?;
        (sol, theory_tpd(&input, &sol.weights)?, min_mse_tpd(&m, &factors)?)
    } else {
        let sol = solve_weights(&input)?;
        (sol, theory_tp(&input, &sol.weights), min_mse_tp(&m, &factors))
    };
    let base = mse_mean(&m, &factors);
    let report = WeightsReport {
        n: factors.n,
        n_prime: factors.n_prime(),
        config: cfg,
        weights: sol.weights,
        residual_sum: sol.residual_sum,
        residual_opt: sol.residual_opt,
        residual_bias: sol.residual_bias,
        condition_estimate: sol.condition_estimate,
        bias: theory.bias,
        mse: theory.mse,
        min_mse,
        mse_mean: base,
        pre: pre_percent(base, theory.mse).ok(),
    };

    let (w, est) = if two_phase { ("h", "tpd") } else { ("w", "tp") };
    let mut t = Table::new(["quantity", "value"]);
    for (i, v) in report.weights.iter().enumerate() {
        t.push(vec![format!("{w}{i}"), fmt_g(*v)]);
    }
    for (name, v) in [
        ("residual_sum".to_string(), report.residual_sum),
        ("residual_opt".to_string(), report.residual_opt),
        ("residual_bias".to_string(), report.residual_bias),
        ("condition_estimate".to_string(), report.condition_estimate),
        (format!("bias({est})"), report.bias),
        (format!("mse({est})"), report.mse),
        ("min_mse".to_string(), report.min_mse),
        ("mse(mean)".to_string(), report.mse_mean),
    ] {
        t.push(vec![name, fmt_g(v)]);
    }
    t.push(vec![format!("PRE({est})"), fmt_opt(report.pre)]);
    Output::from(&a.output, &file).emit(&report, &t, stdout)
}

fn verify(a: &VerifyArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let file = FileConfig::load_optional(a.source.config.as_deref())?;
    let pop = load_source(&a.source, &file)?;
    let m = compute_moments(&pop)?;
    let factors = Design::from(&a.design, &file).factors(pop.len())?;
    let cfg = family_config(&a.family, &file, &m, &factors)?;
    let input = TheoryInput::new(m, factors, cfg)?;

    let mode = match a.mode.or(file.mode).unwrap_or(Mode::Enumerate) {
        Mode::Analytic => {
            return Err(CliError::Usage(
                "verify needs ground truth: use --mode enumerate or --mode mc".into(),
            ))
        }
        Mode::Enumerate => GroundTruthMode::Enumerate,
        Mode::Mc => GroundTruthMode::MonteCarlo {
            reps: a.reps.or(file.reps).unwrap_or(DEFAULT_REPS),
            seed: a.seed.or(file.seed).ok_or_else(|| {
                CliError::Usage("Monte Carlo needs --seed or SURVEYKIT_SEED".into())
            })?,
        },
    };

    let names = if !a.estimators.is_empty() {
        a.estimators.clone()
    } else {
        file.estimators.clone().unwrap_or_default()
    };
    let ids: Vec<EstimatorId> = if names.is_empty() {
        if factors.is_two_phase() {
            EstimatorId::TWO_PHASE_DEFAULT.to_vec()
        } else {
            EstimatorId::SINGLE_PHASE_DEFAULT.to_vec()
        }
    } else {
        names
            .iter()
            .map(|s| s.parse::<EstimatorId>().map_err(|e| CliError::Usage(e.to_string())))
            .collect::<Result<_, _>>()?
    };
    let defaults = VerifyTolerance::default();
    let tol = VerifyTolerance {
        bias: a.tol_bias.or(file.tol_bias).unwrap_or(defaults.bias),
        mse: a.tol_mse.or(file.tol_mse).unwrap_or(defaults.mse),
    };
    if !(tol.bias >= 0.0 && tol.mse >= 0.0) {
        return Err(CliError::Usage("tolerances must be non-negative".into()));
    }
    let report = run_verification(&pop, &input, &ids, mode, tol)?;
    Output::from(&a.output, &file).emit(&report, &verification_table(&report), stdout)?;
    if report.pass {
        Ok(())
    } else {
        Err(CliError::VerificationFailed {
            failed: report.rows.iter().filter(|r| !r.pass).count(),
            total: report.rows.len(),
        })
    }
}

pub fn verification_table(report: &VerificationReport) -> Table {
    let truth = match report.mode {
        GroundTruthMode::Enumerate => "exact",
        GroundTruthMode::MonteCarlo { .. } => "mc",
    };
    let mut t = Table::new([
        "estimator".to_string(),
        "analytic_bias".into(),
        format!("{truth}_bias"),
        "analytic_mse".into(),
        format!("{truth}_mse"),
        "mse_rel_diff".into(),
        "pre_analytic".into(),
        format!("pre_{truth}"),
        "pass".into(),
    ]);
    for r in &report.rows {
        t.push(vec![
            r.estimator.clone(),
            fmt_g(r.analytic_bias),
            fmt_g(r.truth_bias),
            fmt_g(r.analytic_mse),
            fmt_g(r.truth_mse),
            fmt_opt(r.mse_rel_diff),
            fmt_opt(r.pre_analytic),
            fmt_opt(r.pre_truth),
            if r.pass { "pass" } else { "FAIL" }.into(),
        ]);
    }
    t
}

fn generate(a: &GenerateArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let spec = read_synthetic(&a.synthetic)?;
    let pop = generate_synthetic(&spec)?;
    match &a.out {
        Some(path) => {
            let f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
            save_population(&pop, f).map_err(|source| CliError::Input {
                path: path.clone(),
                source,
            })
        }
        None => Ok(save_population(&pop, stdout)?),
    }
}
