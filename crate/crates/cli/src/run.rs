use std::fs;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context, Result};
use clap::Parser;
use molchanov_core::cauchy::{necessity_experiment, CoefficientSet, NecessityOptions};
use molchanov_core::conditions::{
    classify_sector, molchanov_search, molchanov_verdict, theorem4_check, window_profile, MolchanovVerdict,
    SectorVerdict,
};
use molchanov_core::counterexample::select_schedule;
use molchanov_core::discretize::{assemble, BoundaryForm, Grid};
use molchanov_core::potential::{named_potential, PieceKind, Potential, PotentialFile, Weight};
use molchanov_core::spectra::{
    self, compactness_diagnostic, spectral_report, top_singular_values, weyl_check, CompactnessVerdict,
    DiagnosticOptions, Resolvent,
};
use molchanov_core::{Complex64, OperatorMatrix64, Potential64};
use serde_json::json;

use crate::output::{gnuplot, Manifest, ManifestIn, OutDir};
use crate::{
    Cauchy, CheckMolchanov, ClassifySector, Cli, Command, Counterexample, Diagnose, Format, OperatorArgs,
    PotentialArgs, Spectrum, Svd, Theorem4Check, EXIT_ERROR, EXIT_NEGATIVE, EXIT_OK, EXIT_USAGE,
};

/// An invocation that parses but cannot be run as given.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(Usage(msg.into()))
}

/// Domain end for named potentials when nothing else fixes one.
const DEFAULT_END: f64 = 100.0;

struct Outcome {
    verdict: Option<String>,
    negative: bool,
    summary: String,
    json: String,
    csv: String,
}

pub fn main_with(argv: Vec<String>) -> u8 {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_USAGE;
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match execute(cli, argv.into_iter().skip(1).collect()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<Usage>().is_some() {
        return EXIT_USAGE;
    }
    match e.downcast_ref::<molchanov_core::Error>() {
        Some(molchanov_core::Error::Parameter(_)) => EXIT_USAGE,
        _ => EXIT_ERROR,
    }
}

fn execute(cli: Cli, argv: Vec<String>) -> Result<u8> {
    if let Command::Replay(r) = &cli.command {
        let text = fs::read_to_string(&r.manifest).with_context(|| format!("cannot read {}", r.manifest.display()))?;
        let recorded: ManifestIn = serde_json::from_str(&text).map_err(|e| usage(format!("bad manifest: {e}")))?;
        let mut args = vec!["molchanov".to_string()];
        args.extend(strip_out(&recorded.argv));
        args.push("--out".into());
        args.push(cli.out.display().to_string());
        let replayed = Cli::try_parse_from(&args).map_err(|e| usage(format!("manifest arguments no longer parse: {e}")))?;
        if matches!(replayed.command, Command::Replay(_)) {
            return Err(usage("a manifest cannot replay another replay"));
        }
        return execute(replayed, args.into_iter().skip(1).collect());
    }
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut out = OutDir::create(&cli.out)?;
    let outcome = match &cli.command {
        Command::CheckMolchanov(a) => check_molchanov(a, &mut out)?,
        Command::ClassifySector(a) => classify(a, &mut out)?,
        Command::Theorem4Check(a) => theorem4(a, &mut out)?,
        Command::Spectrum(a) => spectrum(a, &mut out)?,
        Command::Svd(a) => svd(a, &mut out)?,
        Command::Diagnose(a) => diagnose(a, &mut out)?,
        Command::Counterexample(a) => counterexample(a, &mut out)?,
        Command::Cauchy(a) => cauchy(a, &mut out)?,
        Command::Replay(_) => unreachable!("handled above"),
    };
    let code = if outcome.negative { EXIT_NEGATIVE } else { EXIT_OK };
    let parameters = serde_json::to_value(&cli.command)?;
    let command = parameters.as_object().and_then(|o| o.keys().next().cloned()).unwrap_or_default();
    let manifest = Manifest {
        tool: "molchanov",
        version: env!("CARGO_PKG_VERSION"),
        core_version: molchanov_core::VERSION,
        argv,
        command,
        parameters,
        threads: rayon::current_num_threads(),
        started_unix,
        elapsed_seconds: started.elapsed().as_secs_f64(),
        exit_code: code,
        verdict: outcome.verdict.clone(),
        outputs: out.files().to_vec(),
    };
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    fs::write(out.root().join("manifest.json"), text).context("cannot write manifest.json")?;
    match cli.format {
        Some(Format::Json) => print!("{}", outcome.json),
        Some(Format::Csv) => print!("{}", outcome.csv),
        None => println!("{}", outcome.summary),
    }
    Ok(code)
}

/// Drops `--out DIR` / `--out=DIR` so a replay can redirect its outputs.
fn strip_out(argv: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(argv.len());
    let mut skip = false;
    for a in argv {
        if skip {
            skip = false;
        } else if a == "--out" {
            skip = true;
        } else if !a.starts_with("--out=") {
            out.push(a.clone());
        }
    }
    out
}

fn load_potential(p: &PotentialArgs, default_end: Option<f64>, out: &mut OutDir) -> Result<Potential64> {
    let path = Path::new(&p.potential);
    let q = if path.is_file() || p.potential.ends_with(".json") {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read potential file {}", path.display()))?;
        let q: Potential64 = PotentialFile::parse(&text)?.build()?;
        match p.domain_end {
            Some(end) if end < q.domain_end() => q.truncated(end)?,
            _ => q,
        }
    } else {
        named_potential(&p.potential, &p.params, p.domain_end.or(default_end))?
    };
    out.write("potential.json", &(q.to_json() + "\n"))?;
    Ok(q)
}

fn parse_bc(s: &str) -> Result<BoundaryForm<f64>> {
    match s {
        "dirichlet" => Ok(BoundaryForm::dirichlet()),
        "neumann" => Ok(BoundaryForm::neumann()),
        _ => {
            let rest = s.strip_prefix("robin:").ok_or_else(|| usage(format!("unknown boundary condition `{s}`")))?;
            let v: Vec<f64> = rest
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| usage(format!("robin coefficients: {e}")))?;
            if v.len() != 2 {
                bail!(usage("robin takes two coefficients A,B"));
            }
            Ok(BoundaryForm::new(Complex64::new(v[0], 0.0), Complex64::new(v[1], 0.0))?)
        }
    }
}

fn operator(a: &OperatorArgs, out: &mut OutDir) -> Result<OperatorMatrix64> {
    let q = load_potential(&a.potential, Some(a.x_end), out)?;
    let grid = Grid::new(a.x_end, a.n)?;
    Ok(assemble(&q, &grid, &parse_bc(&a.bc)?)?)
}

fn c(z: [f64; 2]) -> Complex64 {
    Complex64::new(z[0], z[1])
}

fn check_molchanov(a: &CheckMolchanov, out: &mut OutDir) -> Result<Outcome> {
    let q = load_potential(&a.potential, a.k.map(|k| k as f64 * a.d), out)?;
    let w = Weight::from_exponent(a.w)?;
    let (verdict, offset, profile) = if a.search {
        let s = molchanov_search(&q, a.d, w, a.tol, a.tail_fraction, a.growth_factor)?;
        (s.verdict, s.offset, s.profile)
    } else {
        let p = window_profile(&q, a.d, w, a.tol)?;
        (molchanov_verdict(&p, a.tail_fraction, a.growth_factor)?, 0.0, p)
    };
    let csv = profile.to_csv();
    out.write("profile.csv", &csv)?;
    out.write("profile.gp", &gnuplot("window integrals", "profile.csv", "1:4", "k", "m_k", ""))?;
    let json = out.write_json(
        "verdict.json",
        &json!({ "verdict": verdict, "offset": offset, "d": a.d, "w": a.w, "windows": profile.len(),
                 "potential": q.label() }),
    )?;
    let name = match &verdict {
        MolchanovVerdict::DivergesLikely => "DivergesLikely".to_string(),
        MolchanovVerdict::FailsWithWitness(ix) => format!("FailsWithWitness({} windows)", ix.len()),
        MolchanovVerdict::Inconclusive => "Inconclusive".to_string(),
    };
    Ok(Outcome {
        negative: matches!(verdict, MolchanovVerdict::FailsWithWitness(_)),
        summary: format!("{name}: {} windows of length {} (offset {offset})", profile.len(), a.d),
        verdict: Some(name),
        json,
        csv,
    })
}

fn classify(a: &ClassifySector, out: &mut OutDir) -> Result<Outcome> {
    let q = load_potential(&a.potential, Some(DEFAULT_END), out)?;
    let cands: Vec<Complex64> = if a.q0.is_empty() { vec![Complex64::new(0.0, 0.0)] } else { a.q0.iter().map(|&z| c(z)).collect() };
    let s = classify_sector(&q, &cands, a.x0, a.step)?;
    let json = out.write_json("sector.json", &s)?;
    let csv = format!(
        "verdict,alpha_hat,beta_hat,margin,q0_re,q0_im,x0\n{:?},{},{},{},{},{},{}\n",
        s.verdict, s.alpha_hat, s.beta_hat, s.margin, s.q0.re, s.q0.im, s.x0
    );
    out.write("sector.csv", &csv)?;
    let name = format!("{:?}", s.verdict);
    Ok(Outcome {
        negative: s.verdict == SectorVerdict::Fails,
        summary: format!("{name}: arg(q - q0) in [{:.6}, {:.6}], opening {:.6}", s.alpha_hat, s.beta_hat, s.margin),
        verdict: Some(name),
        json,
        csv,
    })
}

fn theorem4(a: &Theorem4Check, out: &mut OutDir) -> Result<Outcome> {
    let q = load_potential(&a.potential, Some(DEFAULT_END), out)?;
    let r = theorem4_check(&q, a.x0, a.kappa, a.delta, a.step)?;
    let json = out.write_json("theorem4.json", &r)?;
    let csv = format!(
        "pass,min_modulus,max_arg_excess,max_ratio,rho_min_ratio,c0\n{},{},{},{},{},{}\n",
        r.pass, r.min_modulus, r.max_arg_excess, r.max_ratio, r.rho_min_ratio, r.c0
    );
    out.write("theorem4.csv", &csv)?;
    let name = if r.pass { "pass" } else { "fail" }.to_string();
    Ok(Outcome {
        negative: !r.pass,
        summary: format!(
            "hypotheses {name}: min|q| = {:.4}, arg excess = {:.4}, ratio = {:.4}, min ρ/|p| = {:.6} (C0 = {:.6})",
            r.min_modulus, r.max_arg_excess, r.max_ratio, r.rho_min_ratio, r.c0
        ),
        verdict: Some(name),
        json,
        csv,
    })
}

fn spectrum(a: &Spectrum, out: &mut OutDir) -> Result<Outcome> {
    let m = operator(&a.op, out)?;
    let rep = spectral_report(&m)?;
    let json = out.write_json("spectrum.json", &rep)?;
    let rows = rep
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(j, z)| vec![(j + 1).to_string(), z.re.to_string(), z.im.to_string(), z.norm().to_string()])
        .collect();
    let csv = out.write_csv("spectrum.csv", &["j", "re", "im", "modulus"], rows)?;
    out.write("spectrum.gp", &gnuplot("eigenvalues", "spectrum.csv", "2:3", "Re λ", "Im λ", ""))?;
    if a.export_matrix {
        out.write("matrix.csv", &m.to_csv())?;
        out.write_json("matrix.json", &m.header())?;
    }
    let first: Vec<String> = rep.eigenvalues.iter().take(5).map(|z| format!("{:.6}{:+.6}i", z.re, z.im)).collect();
    Ok(Outcome {
        verdict: None,
        negative: false,
        summary: format!("{} eigenvalues (solver tol {:.1e}); smallest: {}", rep.eigenvalues.len(), rep.solver_tol, first.join(", ")),
        json,
        csv,
    })
}

fn svd(a: &Svd, out: &mut OutDir) -> Result<Outcome> {
    let m = operator(&a.op, out)?;
    let ks = 1..=a.weyl_k.min(m.dim());
    let (values, weyl, what) = match a.resolvent {
        Some(z) => {
            let r = Resolvent::new(&m, c(z))?;
            let top: Vec<f64> = top_singular_values(&r, a.top.min(m.dim()))?.iter().map(|t| t.value).collect();
            let weyl = ks.map(|k| weyl_check(&r, k)).collect::<molchanov_core::Result<Vec<_>>>()?;
            (top, weyl, format!("resolvent at {}", c(z)))
        }
        None => {
            let s = spectra::singular_values(&m)?;
            let weyl = ks.map(|k| weyl_check(&m, k)).collect::<molchanov_core::Result<Vec<_>>>()?;
            (s, weyl, "operator".to_string())
        }
    };
    let json = out.write_json("svd.json", &json!({ "of": what, "singular_values": values, "weyl": weyl }))?;
    let rows = values.iter().enumerate().map(|(i, s)| vec![(i + 1).to_string(), s.to_string()]).collect();
    let csv = out.write_csv("svd.csv", &["i", "s"], rows)?;
    out.write("svd.gp", &gnuplot("singular values", "svd.csv", "1:2", "i", "s_i", "set logscale y\n"))?;
    let all_pass = weyl.iter().all(|w| w.pass);
    Ok(Outcome {
        verdict: Some(if all_pass { "weyl-pass" } else { "weyl-fail" }.into()),
        negative: !all_pass,
        summary: format!(
            "{what}: s_1 = {:.6e}, {} values; Weyl products {}",
            values.first().copied().unwrap_or(0.0),
            values.len(),
            if all_pass { "hold" } else { "VIOLATED" }
        ),
        json,
        csv,
    })
}

fn diagnose(a: &Diagnose, out: &mut OutDir) -> Result<Outcome> {
    let end = a.x_list.iter().copied().fold(f64::NAN, f64::max);
    let q = load_potential(&a.potential, Some(end), out)?;
    let opts = DiagnosticOptions {
        h: a.h,
        drift_tol: a.drift_tol,
        exponent_threshold: a.exponent_threshold,
        count_radius: a.count_radius,
    };
    let d = compactness_diagnostic(&q, &parse_bc(&a.bc)?, &a.x_list, a.k, opts)?;
    let json = out.write_json("diagnose.json", &d)?;
    let csv = d.to_csv();
    out.write("diagnose.csv", &csv)?;
    out.write("diagnose.gp", &gnuplot("tracked eigenvalues", "diagnose.csv", "1:3", "X", "Re λ_j", ""))?;
    let name = format!("{:?}", d.verdict);
    Ok(Outcome {
        negative: d.verdict == CompactnessVerdict::CollapsesOrPlateausNoncompactLike,
        summary: format!("{name}: λ1 exponent {:.3}, counts {:?}", d.lambda1_exponent, d.window_counts),
        verdict: Some(name),
        json,
        csv,
    })
}

fn counterexample(a: &Counterexample, out: &mut OutDir) -> Result<Outcome> {
    let r = select_schedule::<f64>(a.k, a.n, a.cap, a.margin)?;
    let json = out.write_json("schedule.json", &r)?;
    let mut rows = Vec::new();
    for b in &r.blocks {
        rows.push(vec![
            b.k.to_string(),
            b.u.to_string(),
            b.n_k.map(|n| n.to_string()).unwrap_or_default(),
            b.s_hat.to_string(),
            b.residual.to_string(),
            b.boundary_max.to_string(),
        ]);
        if let Some(w) = &b.witness {
            out.write(&format!("witness_{}.csv", b.k), &w.to_csv())?;
        }
    }
    let csv = out.write_csv("schedule.csv", &["k", "u", "n_k", "s_hat", "residual", "boundary_max"], rows)?;
    let plots: Vec<String> = r.blocks.iter().map(|b| format!("'witness_{}.csv' using 1:2 title 'k={}'", b.k, b.k)).collect();
    out.write(
        "witness.gp",
        &format!("set datafile separator ','\nset xlabel 'x'\nset ylabel 'Re y'\nplot {}\n", plots.join(", ")),
    )?;
    let ok = r.all_accepted();
    let sched: Vec<String> = r.blocks.iter().map(|b| b.n_k.map_or("-".into(), |n| n.to_string())).collect();
    Ok(Outcome {
        verdict: Some(if ok { "schedule" } else { "block-failure" }.into()),
        negative: !ok,
        summary: format!("n_k = [{}]; max residual {:.4}", sched.join(", "), r.blocks.iter().map(|b| b.residual).fold(0.0, f64::max)),
        json,
        csv,
    })
}

fn window_starts(spec: &str) -> Result<Vec<f64>> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| usage(format!("window spec `{spec}`: {e}")));
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            bail!(usage("window spec is `first:spacing:count` or a comma list"));
        }
        let (first, spacing) = (num(parts[0])?, num(parts[1])?);
        let count: usize = parts[2].trim().parse().map_err(|e| usage(format!("window count: {e}")))?;
        Ok((0..count).map(|k| first + spacing * k as f64).collect())
    } else {
        spec.split(',').map(num).collect()
    }
}

fn coefficient(spec: &str, domain_end: f64) -> Result<Potential64> {
    let path = Path::new(spec);
    if path.is_file() || spec.ends_with(".json") {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read coefficient file {}", path.display()))?;
        return Ok(PotentialFile::parse(&text)?.build()?);
    }
    let (name, params) = spec.split_once(':').unwrap_or((spec, ""));
    let params: Vec<f64> = if params.is_empty() {
        Vec::new()
    } else {
        params
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| usage(format!("coefficient `{spec}`: {e}")))?
    };
    Ok(named_potential(name, &params, Some(domain_end))?)
}

fn cauchy(a: &Cauchy, out: &mut OutDir) -> Result<Outcome> {
    if a.order < 2 {
        bail!(usage("order must be at least 2"));
    }
    if a.coeffs.len() > a.order - 1 {
        bail!(usage(format!("order {} takes at most {} coefficients", a.order, a.order - 1)));
    }
    let mut p = a.coeffs.iter().map(|s| coefficient(s, a.domain_end)).collect::<Result<Vec<_>>>()?;
    while p.len() < a.order - 1 {
        p.push(Potential::single(PieceKind::constant(Complex64::new(0.0, 0.0)), a.domain_end)?);
    }
    let set = CoefficientSet::new(a.order, c(a.c0), p)?;
    let starts = window_starts(&a.window_spec)?;
    let opts = NecessityOptions { steps: a.steps, eta_target: a.eta_target, ..Default::default() };
    let rep = necessity_experiment(&starts, a.d, &set, &opts)?;
    let json = out.write_json("cauchy.json", &rep)?;
    let mut rows = Vec::new();
    for w in &rep.windows {
        rows.push(vec![
            w.k.to_string(),
            w.a.to_string(),
            w.restricted_norm.to_string(),
            w.s_next.to_string(),
            w.residual.to_string(),
            w.boundary_max.to_string(),
        ]);
        if w.failure.is_none() {
            out.write(&format!("bump_{}.csv", w.k), &w.bump_csv())?;
        }
    }
    let csv = out.write_csv("windows.csv", &["k", "a", "restricted_norm", "s_next", "residual", "boundary_max"], rows)?;
    out.write("bumps.gp", &gnuplot("bump residuals", "windows.csv", "2:5", "window start", "residual", ""))?;
    let ok = rep.all_succeeded();
    Ok(Outcome {
        verdict: Some(if ok { "bounded-residuals" } else { "window-failure" }.into()),
        negative: !ok,
        summary: format!(
            "{} windows, d = {}, η = {:.4}; residual max {:.4}, spread {:.4}",
            rep.windows.len(),
            rep.d,
            rep.eta,
            rep.residual_max,
            rep.residual_spread()
        ),
        json,
        csv,
    })
}
