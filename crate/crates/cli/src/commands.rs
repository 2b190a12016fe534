use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use log::info;
use nalgebra::DVector;

use tangle_core::approx::{
    fit_closed_with, fit_open_with, fitted_points, generate_closed_test_curve, generate_helix,
    ingest_closed_curve, ingest_curve, FitOptions, PenaltySchedule,
};
use tangle_core::chain::{angles_to_chain, chain_to_angles};
use tangle_core::geodesy::{
    exp_closed_with, geodesic_to_tangles, log_closed_with, seeded_tangent, ExpOptions, LogOptions,
};
use tangle_core::io::{
    read_points_csv, read_tangle, to_json, write_json, write_points_csv, write_polyline_csv,
    GeodesicDocument, GeodesicSummary, TangleDocument,
};
use tangle_core::registry::{inner_solvers, integrators};
use tangle_core::torus::{geodesic_path_torus, log_torus, TorusPoint, TorusTangent};
use tangle_core::validation::{validate_chain, ValidationReport};
use tangle_core::{ClosedState, FirstLink, TangleCurve};

use crate::{
    FitArgs, GenCommand, GeodesicArgs, LogmapArgs, RankArgs, SampleArgs, TangentSource,
    ValidateArgs,
};

/// Residual `‖F‖∞` above which a closed tangle is rejected as input.
const MANIFOLD_TOLERANCE: f64 = 1e-6;

pub enum Outcome {
    Done,
    NotConverged(String),
}

fn mode(free: bool) -> FirstLink {
    if free {
        FirstLink::Free
    } else {
        FirstLink::Fixed
    }
}

fn load(path: &Path) -> Result<TangleDocument> {
    read_tangle(path).with_context(|| format!("reading {}", path.display()))
}

fn closed_state(doc: &TangleDocument, mode: FirstLink, path: &Path) -> Result<ClosedState> {
    if !doc.closed {
        bail!("{} is not a closed tangle", path.display());
    }
    let state = ClosedState::from_chain(&doc.chain()?, mode)
        .with_context(|| format!("{} is not a closed tangle", path.display()))?;
    let drift = state.system().residuals(state.coords())?.amax();
    if drift > MANIFOLD_TOLERANCE {
        bail!(
            "{} is off the closed-tangle manifold (max residual {drift:e})",
            path.display()
        );
    }
    Ok(state)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, format!("{text}\n"))
                .with_context(|| format!("writing {}", path.display()))?;
            info!("wrote {}", path.display());
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn csv_sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

pub fn fit(args: FitArgs) -> Result<Outcome> {
    let points = read_points_csv(&args.curve)
        .with_context(|| format!("reading {}", args.curve.display()))?;
    let closed = args.closed && !args.open;
    let target = if closed {
        ingest_closed_curve(&points, args.links, args.samples_per_link)?
    } else {
        ingest_curve(&points, args.links, args.samples_per_link)?
    };
    let schedule = PenaltySchedule {
        initial_weight: args.initial_weight,
        growth_factor: args.growth_factor,
        outer_iterations: args.outer_iterations,
        inner_tolerance: args.inner_tolerance,
    };
    let opts = FitOptions {
        schedule,
        solver: Arc::from(inner_solvers().create(&args.solver)?),
        restarts: args.restarts,
        seed: args.seed,
    };
    let report = if closed {
        fit_closed_with(&target, args.links, &opts)?
    } else {
        fit_open_with(&target, args.links, &opts)?
    };

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let aligned = report.aligned_curve();
    write_json(
        &args.out.join("tangle.json"),
        &TangleDocument::from_curve(&aligned, closed),
    )?;
    let params = target.params();
    write_polyline_csv(
        File::create(args.out.join("target.csv"))?,
        &params,
        target.points(),
    )?;
    write_polyline_csv(
        File::create(args.out.join("fitted.csv"))?,
        &params,
        &fitted_points(&aligned, &target)?,
    )?;
    write_json(&args.out.join("fit_report.json"), &report)?;
    println!(
        "objective {:e}, constraint residual {:e}, rms point error {:e}",
        report.objective, report.constraint_residual, report.rms_point_error
    );
    if report.converged {
        Ok(Outcome::Done)
    } else {
        Ok(Outcome::NotConverged(format!(
            "fit did not reach feasibility (constraint residual {:e})",
            report.constraint_residual
        )))
    }
}

fn explicit_tangent(source: &TangentSource) -> Result<Option<Vec<f64>>> {
    let text = match (&source.tangent, &source.tangent_file) {
        (Some(t), _) => t.clone(),
        (None, Some(path)) => {
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
        }
        (None, None) => return Ok(None),
    };
    let v: Vec<f64> =
        serde_json::from_str(&text).context("tangent must be a JSON array of numbers")?;
    Ok(Some(v))
}

fn require_source(source: &TangentSource) -> Result<u64> {
    source
        .seed
        .ok_or_else(|| anyhow::anyhow!("supply --tangent, --tangent-file or --seed"))
}

pub fn geodesic(args: GeodesicArgs) -> Result<Outcome> {
    let doc = load(&args.tangle)?;
    let tangent = explicit_tangent(&args.source)?;
    let tangles: Vec<TangleCurve> = if doc.closed {
        let state = closed_state(&doc, mode(args.free_first_link), &args.tangle)?;
        let u = match tangent {
            Some(v) => DVector::from_vec(v),
            None => seeded_tangent(&state, require_source(&args.source)?, args.source.norm)?,
        };
        let opts = ExpOptions {
            steps: args.steps,
            stepper: Arc::from(integrators().create(&args.integrator)?),
            ..ExpOptions::default()
        };
        let path = exp_closed_with(&state, &u, &opts)?;
        geodesic_to_tangles(&path)
    } else {
        let chain = doc.chain()?;
        let angles = chain_to_angles(&chain)?;
        let p = TorusPoint::from_angles(angles.as_slice().to_vec());
        let theta = match tangent {
            Some(v) => TorusTangent::new(v),
            None => TorusTangent::seeded(p.dim(), require_source(&args.source)?, args.source.norm),
        };
        let (v0, v1) = (chain.vectors()[0], chain.vectors()[1]);
        geodesic_path_torus(&p, &theta, args.steps + 1)?
            .iter()
            .map(|q| {
                let shape = tangle_core::ShapeAngles::new(q.angles().to_vec());
                Ok(TangleCurve::new(
                    angles_to_chain(&shape, v0, v1)?,
                    doc.curve()?.base_translation(),
                ))
            })
            .collect::<Result<_>>()?
    };
    let report = tangles
        .iter()
        .map(|c| validate_chain(c.chain(), doc.closed))
        .fold(ValidationReport::default(), |acc, r| acc.merge(&r));
    let document = GeodesicDocument {
        tangles: tangles
            .iter()
            .map(|c| TangleDocument::from_curve(c, doc.closed))
            .collect(),
        summary: GeodesicSummary::from(&report),
    };
    emit(args.out.as_deref(), &to_json(&document)?)?;
    eprintln!(
        "max angle deviation {:e} deg, max norm deviation {:e}",
        report.max_orthogonality_deviation_degrees, report.max_norm_deviation
    );
    Ok(Outcome::Done)
}

pub fn logmap(args: LogmapArgs) -> Result<Outcome> {
    let a = load(&args.from)?;
    let b = load(&args.to)?;
    if a.closed != b.closed {
        bail!("cannot join an open tangle to a closed one");
    }
    if a.n != b.n {
        bail!("link counts differ ({} vs {})", a.n, b.n);
    }
    if !a.closed {
        let p = TorusPoint::from_angles(chain_to_angles(&a.chain()?)?.as_slice().to_vec());
        let q = TorusPoint::from_angles(chain_to_angles(&b.chain()?)?.as_slice().to_vec());
        let theta = log_torus(&p, &q)?;
        emit(args.out.as_deref(), &serde_json::to_string(&theta)?)?;
        return Ok(Outcome::Done);
    }
    let m = mode(args.free_first_link);
    let v0 = closed_state(&a, m, &args.from)?;
    let v1 = closed_state(&b, m, &args.to)?;
    let opts = LogOptions {
        threshold: args.threshold,
        max_iters: args.max_iters,
        exp: ExpOptions {
            steps: args.steps,
            stepper: Arc::from(integrators().create(&args.integrator)?),
            ..ExpOptions::default()
        },
    };
    let report = log_closed_with(&v0, &v1, &opts)?;
    emit(args.out.as_deref(), &to_json(&report)?)?;
    eprintln!(
        "iterations {}, final gap {:e}",
        report.iterations, report.final_gap
    );
    if report.converged {
        Ok(Outcome::Done)
    } else {
        Ok(Outcome::NotConverged(format!(
            "shooting stopped after {} iterations with gap {:e}{}",
            report.iterations,
            report.final_gap,
            if report.diverged { " (diverging)" } else { "" }
        )))
    }
}

pub fn validate(args: ValidateArgs) -> Result<Outcome> {
    let doc = load(&args.tangle)?;
    let report = validate_chain(&doc.chain()?, doc.closed);
    println!("links                  {}", doc.n);
    println!("closed                 {}", doc.closed);
    println!("max norm deviation     {:e}", report.max_norm_deviation);
    println!(
        "max angle deviation    {:e} deg",
        report.max_orthogonality_deviation_degrees
    );
    println!("C0 residual            {:e}", report.c0_residual);
    println!("C1 residual            {:e}", report.c1_residual);
    if doc.closed {
        println!("closure residual       {:e}", report.closure_residual);
    }
    if let Some(out) = &args.out {
        write_json(out, &report)?;
    }
    Ok(Outcome::Done)
}

pub fn rank(args: RankArgs) -> Result<Outcome> {
    let doc = load(&args.tangle)?;
    let state = closed_state(&doc, mode(args.free_first_link), &args.tangle)?;
    let r = state
        .system()
        .numerical_rank(state.coords(), args.tolerance)?;
    println!("{r}");
    Ok(Outcome::Done)
}

pub fn sample(args: SampleArgs) -> Result<Outcome> {
    let curve = load(&args.tangle)?.curve()?;
    let (params, points): (Vec<f64>, Vec<_>) = curve
        .sample_polyline(args.samples_per_link)?
        .into_iter()
        .unzip();
    let mut sink = csv_sink(args.out.as_deref())?;
    write_polyline_csv(&mut sink, &params, &points)?;
    sink.flush()?;
    Ok(Outcome::Done)
}

pub fn generate(cmd: GenCommand) -> Result<Outcome> {
    let (target, out) = match cmd {
        GenCommand::Helix {
            a,
            b,
            links,
            samples_per_link,
            out,
        } => (generate_helix(a, b, links, samples_per_link)?, out),
        GenCommand::Closed {
            a,
            b,
            c,
            d,
            links,
            samples_per_link,
            samples,
            out,
        } => (
            generate_closed_test_curve(a, b, c, d, samples, links, samples_per_link)?,
            out,
        ),
    };
    let mut sink = csv_sink(out.as_deref())?;
    write_points_csv(&mut sink, target.points())?;
    sink.flush()?;
    Ok(Outcome::Done)
}
