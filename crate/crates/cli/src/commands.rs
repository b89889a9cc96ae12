use crate::config::{DataConfig, GridConfig, RunConfig};
use dataext_core::dataio::{emit_plot, load_csv, write_csv, Features};
use dataext_core::externality::{delta, detect, slope_scan, DeltaReport, SlopeSegment};
use dataext_core::intervention::{build_split, evaluate_intervention};
use dataext_core::sampling::stratified_split;
use dataext_core::sweep::{run_sweep, DataSource, RiskSurface, SurfaceMeta, SweepPlan};
use dataext_core::synthetic::gen_affine;
use dataext_core::{Allocation, Error, GroupId, GroupedDataset, Purpose, Result, SeedSpec};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

pub const DATASET_CSV: &str = "dataset.csv";
pub const SPEC_JSON: &str = "spec.json";
pub const DETAIL_CSV: &str = "surface_detail.csv";
pub const SUMMARY_CSV: &str = "surface_summary.csv";
pub const SURFACE_META_JSON: &str = "surface_meta.json";
pub const FINDINGS_JSON: &str = "findings.json";
pub const DELTA_JSON: &str = "delta.json";
pub const SPLIT_JSON: &str = "split_model.json";
pub const INTERVENTION_CSV: &str = "intervention.csv";
pub const SLOPES_JSON: &str = "slopes.json";
pub const CONFIG_ECHO_JSON: &str = "run_config.json";

pub struct Ctx {
    pub cfg: RunConfig,
    pub out: PathBuf,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        std::fs::write(self.path(name), bytes)?;
        Ok(())
    }

    pub fn echo_config(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out)?;
        self.write_json(CONFIG_ECHO_JSON, &self.cfg)
    }
}

pub fn synth(ctx: &Ctx) -> Result<String> {
    let spec = ctx
        .cfg
        .data
        .synthetic_spec()
        .ok_or_else(|| Error::InvalidConfig("synth needs a preset or spec data source".into()))?;
    let alloc = &ctx
        .cfg
        .synth
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("synth needs a 'synth.allocation' section".into()))?
        .allocation;
    let ds = gen_affine(&spec, alloc, &SeedSpec::new(ctx.cfg.seed, Purpose::Synth))?;
    write_csv(&ds, BufWriter::new(File::create(ctx.path(DATASET_CSV))?))?;
    ctx.write_json(SPEC_JSON, &spec)?;
    Ok(format!(
        "wrote {} instances {alloc} to {}\n",
        ds.len(),
        ctx.path(DATASET_CSV).display()
    ))
}

struct Data {
    source: DataSource,
    eval_set: GroupedDataset,
}

fn load_data(cfg: &RunConfig) -> Result<Data> {
    let sweep = cfg.sweep_config()?;
    match &cfg.data {
        DataConfig::Csv(c) => {
            let all = load_csv(&c.path, &c.schema)?;
            let (pool, eval_set) = match &c.eval_path {
                Some(_) if matches!(c.schema.features, Features::Text { .. }) => {
                    return Err(Error::InvalidConfig(
                        "text data must come from one file so tf-idf is fitted on the whole corpus".into(),
                    ))
                }
                Some(p) => (all, load_csv(p, &c.schema)?),
                None => stratified_split(&all, c.eval_fraction, &SeedSpec::new(cfg.seed, Purpose::Split))?,
            };
            Ok(Data {
                source: DataSource::Empirical(pool),
                eval_set,
            })
        }
        _ => {
            let spec = cfg.data.synthetic_spec().expect("synthetic data");
            let eval_set = dataext_core::sweep::synthetic_eval_set(&spec, sweep.eval_size, cfg.seed)?;
            Ok(Data {
                source: DataSource::Synthetic(spec),
                eval_set,
            })
        }
    }
}

fn plan(cfg: &RunConfig, data: Data) -> Result<SweepPlan> {
    let sweep = cfg.sweep_config()?;
    let grid = sweep.grid.allocations()?;
    let plan = match data.source {
        DataSource::Synthetic(spec) => {
            let mut p = SweepPlan::synthetic(spec, grid, sweep.trials, cfg.train.clone(), cfg.seed, sweep.eval_size)?;
            p.metric = sweep.metric;
            p
        }
        DataSource::Empirical(pool) => SweepPlan::empirical(
            pool,
            data.eval_set,
            grid,
            sweep.trials,
            cfg.train.clone(),
            sweep.metric,
            cfg.seed,
        ),
    };
    plan.validate()?;
    Ok(plan)
}

#[derive(Serialize, Deserialize)]
struct SurfaceEcho {
    key: serde_json::Value,
    meta: SurfaceMeta,
}

fn write_surface(ctx: &Ctx, surface: &RiskSurface) -> Result<()> {
    surface.write_detail_csv(BufWriter::new(File::create(ctx.path(DETAIL_CSV))?))?;
    surface.write_summary_csv(BufWriter::new(File::create(ctx.path(SUMMARY_CSV))?))?;
    let echo = SurfaceEcho {
        key: ctx.cfg.surface_key(),
        meta: surface.meta.clone(),
    };
    ctx.write_json(SURFACE_META_JSON, &echo)
}

/// Surface from a previous `sweep` in the output directory if it was made
/// from the same config, else a fresh sweep.
fn surface(ctx: &Ctx) -> Result<RiskSurface> {
    if let Ok(text) = std::fs::read_to_string(ctx.path(SURFACE_META_JSON)) {
        if let Ok(echo) = serde_json::from_str::<SurfaceEcho>(&text) {
            if echo.key == ctx.cfg.surface_key() {
                if let Ok(f) = File::open(ctx.path(DETAIL_CSV)) {
                    log::info!("reusing surface in {}", ctx.out.display());
                    return RiskSurface::read_detail_csv(f, Some(echo.meta));
                }
            }
        }
    }
    log::info!("no matching surface in {}; sweeping", ctx.out.display());
    let s = run_sweep(&plan(&ctx.cfg, load_data(&ctx.cfg)?)?)?;
    write_surface(ctx, &s)?;
    Ok(s)
}

pub fn sweep(ctx: &Ctx) -> Result<String> {
    let plan = plan(&ctx.cfg, load_data(&ctx.cfg)?)?;
    let s = run_sweep(&plan)?;
    write_surface(ctx, &s)?;
    let failed = s.cells().iter().filter(|c| !c.is_valid()).count();
    let mut msg = format!(
        "swept {} allocations x {} trials, {} eval groups",
        s.grid().len(),
        plan.trials,
        s.eval_groups().len()
    );
    if failed > 0 {
        let _ = write!(msg, "; {failed} cells failed (see {DETAIL_CSV})");
    }
    msg.push('\n');
    Ok(msg)
}

#[derive(Serialize)]
struct FindingsFile<'a> {
    z_threshold: f64,
    findings: &'a [dataext_core::externality::ExternalityFinding],
}

pub fn detect_cmd(ctx: &Ctx) -> Result<String> {
    let s = surface(ctx)?;
    let z = ctx.cfg.detect.z_threshold;
    let findings = detect(&s, z);
    ctx.write_json(
        FINDINGS_JSON,
        &FindingsFile {
            z_threshold: z,
            findings: &findings,
        },
    )?;
    let significant = findings.iter().filter(|f| f.significant).count();
    let mut msg = format!(
        "{} externalities ({significant} significant at z >= {z})\n",
        findings.len()
    );
    for f in findings.iter().filter(|f| f.significant).take(10) {
        let _ = writeln!(
            msg,
            "  {}: {} -> {} raises risk by {:.6}",
            f.eval_group, f.sub, f.sup, f.magnitude
        );
    }
    Ok(msg)
}

fn reference(ctx: &Ctx, s: &RiskSurface) -> Allocation {
    match &ctx.cfg.delta.reference {
        Some(r) => r.clone(),
        None => {
            let mut best = &s.grid()[0];
            for a in s.grid() {
                if a.total() > best.total() {
                    best = a;
                }
            }
            best.clone()
        }
    }
}

fn delta_reports(ctx: &Ctx, s: &RiskSurface) -> Result<(Allocation, Vec<DeltaReport>)> {
    let r = reference(ctx, s);
    let reports = s.eval_groups().iter().map(|g| delta(s, g, &r)).collect::<Result<_>>()?;
    Ok((r, reports))
}

#[derive(Serialize)]
struct DeltaFile<'a> {
    reference: &'a Allocation,
    reports: &'a [DeltaReport],
}

pub fn delta_cmd(ctx: &Ctx) -> Result<String> {
    let s = surface(ctx)?;
    let (r, reports) = delta_reports(ctx, &s)?;
    ctx.write_json(
        DELTA_JSON,
        &DeltaFile {
            reference: &r,
            reports: &reports,
        },
    )?;
    let mut msg = format!("reference {r}\n");
    for d in &reports {
        let z = d.z.map_or("n/a".to_owned(), |z| format!("{z:.2}"));
        let _ = writeln!(
            msg,
            "  {}: delta={:.6} at {} (z={z})",
            d.eval_group, d.delta, d.best_sub
        );
    }
    Ok(msg)
}

pub fn split_cmd(ctx: &Ctx) -> Result<String> {
    let s = surface(ctx)?;
    let (r, reports) = delta_reports(ctx, &s)?;
    let data = load_data(&ctx.cfg)?;
    let metric = ctx.cfg.sweep_config()?.metric;
    let options = ctx.cfg.split.options();

    let mut table = csv::Writer::from_writer(Vec::new());
    table.write_record(["eval_group", "rebuild", "risk_before", "risk_after", "improvement"])?;
    let mut per_group: BTreeMap<GroupId, Vec<f64>> = BTreeMap::new();
    for rebuild in 0..ctx.cfg.split.rebuilds {
        let split = build_split(
            &data.source,
            &r,
            &reports,
            &ctx.cfg.train,
            ctx.cfg.seed,
            rebuild as u64,
            &options,
        )?;
        if rebuild == 0 {
            ctx.write_json(SPLIT_JSON, &split)?;
        }
        for row in evaluate_intervention(&split, &data.eval_set, s.eval_groups(), metric)? {
            table.write_record([
                row.eval_group.to_string(),
                rebuild.to_string(),
                row.risk_before.to_string(),
                row.risk_after.to_string(),
                row.improvement().to_string(),
            ])?;
            per_group
                .entry(row.eval_group.clone())
                .or_default()
                .push(row.improvement());
        }
    }
    let bytes = table.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    std::fs::write(ctx.path(INTERVENTION_CSV), bytes)?;

    let mut msg = format!("split model at reference {r}\n");
    for d in &reports {
        let imp = &per_group[&d.eval_group];
        let mean = imp.iter().sum::<f64>() / imp.len() as f64;
        let _ = writeln!(
            msg,
            "  {}: delta={:.6}, mean improvement over {} rebuild(s)={mean:.6}",
            d.eval_group,
            d.delta,
            imp.len()
        );
    }
    Ok(msg)
}

pub fn plot_name(axis: &GroupId) -> String {
    let safe: String = axis
        .as_str()
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("risk_by_{safe}.svg")
}

pub fn report_cmd(ctx: &Ctx) -> Result<String> {
    let s = surface(ctx)?;
    let axis = match (&ctx.cfg.report.axis, &ctx.cfg.sweep_config()?.grid) {
        (Some(a), _) => a.clone(),
        (None, GridConfig::Axis(a)) => a.varying.clone(),
        (None, _) => {
            return Err(Error::InvalidConfig(
                "report.axis is required for explicit allocation grids".into(),
            ))
        }
    };
    let svg = emit_plot(&s, &axis)?;
    let name = plot_name(&axis);
    std::fs::write(ctx.path(&name), svg)?;
    let slopes: BTreeMap<&GroupId, Vec<SlopeSegment>> = s
        .eval_groups()
        .iter()
        .map(|g| Ok((g, slope_scan(&s, g, &axis)?)))
        .collect::<Result<_>>()?;
    ctx.write_json(SLOPES_JSON, &slopes)?;
    let rising: usize = slopes.values().flatten().filter(|seg| seg.sign > 0).count();
    Ok(format!(
        "wrote {name} and {SLOPES_JSON}; {rising} rising segments along {axis}\n"
    ))
}
