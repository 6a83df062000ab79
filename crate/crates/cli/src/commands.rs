use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};

use async_sparse::analysis::{
    analytic_dense_ledger, default_radii, fractal_dimension, fractal_dimension_mean, ledger_for_run, ActiveMask,
    FlopLedger, LayerTrace, Mode,
};
use async_sparse::engine::{init_state, NetworkState};
use async_sparse::events::{generate_events, read_events, write_events};
use async_sparse::model::{load_model, random_model, save_model, ArchitectureTemplate};
use async_sparse::real::max_rel_deviation;
use async_sparse::representation::{build, DEFAULT_WINDOW};
use async_sparse::sparse::{dense_forward, sparse_forward, DenseMap, DenseSemantics, SparseFeatureMap};
use async_sparse::{Event, EventStream, NetworkSpec, ReprKind, Site, SlidingWindowState, SparseUpdate};

use crate::report::{Cell, Report};
use crate::{frames, CompareArgs, FlopsArgs, FractalArgs, GenEventsArgs, GenModelArgs, RunArgs, StreamArgs, SEED_ENV};

fn env_seed() -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().with_context(|| format!("{SEED_ENV}={v:?} is not an unsigned integer")),
        Err(_) => Ok(0),
    }
}

/// A model file, or `random:<template>` instantiated for the given sensor.
fn resolve_model(
    spec: &str,
    width: usize,
    height: usize,
    repr: Option<ReprKind>,
    window: Option<usize>,
) -> Result<NetworkSpec<f32>> {
    let mut net = if let Some(name) = spec.strip_prefix("random:") {
        let t = ArchitectureTemplate::by_name(name, width, height, repr.unwrap_or(ReprKind::Histogram))?
            .with_window(window.unwrap_or(DEFAULT_WINDOW));
        random_model(env_seed()?, &t)?
    } else {
        let net = load_model(spec).with_context(|| format!("loading model {spec}"))?;
        if let Some(r) = repr {
            if r != net.repr {
                bail!("model {spec} expects {} input, not {}", net.repr.name(), r.name());
            }
        }
        net
    };
    if let Some(w) = window {
        net.window = w;
    }
    if width > net.input_width || height > net.input_height {
        bail!("{width}x{height} events do not fit the model input {}x{}", net.input_width, net.input_height);
    }
    Ok(net)
}

fn load_stream(path: &Path, limit: Option<usize>) -> Result<EventStream> {
    let s = read_events(path).with_context(|| format!("reading events {}", path.display()))?;
    Ok(match limit {
        Some(n) if n < s.len() => {
            let (w, h) = (s.width(), s.height());
            let mut ev = s.into_events();
            ev.truncate(n);
            EventStream::new(w, h, ev)?
        }
        _ => s,
    })
}

struct Session {
    net: Arc<NetworkSpec<f32>>,
    events: EventStream,
    batch: usize,
}

impl Session {
    fn open(a: &StreamArgs) -> Result<Self> {
        if a.batch == 0 {
            bail!("--batch must be positive");
        }
        let events = load_stream(&a.events, a.limit)?;
        let net = resolve_model(&a.model, events.width(), events.height(), a.repr.map(Into::into), a.window)?;
        Ok(Self { net: Arc::new(net), events, batch: a.batch })
    }

    fn window(&self) -> Result<SlidingWindowState> {
        Ok(SlidingWindowState::new(self.net.repr, self.net.input_width, self.net.input_height, self.net.window)?)
    }

    /// Feeds the stream step by step, handing each update to `f`.
    fn for_each_step(&self, mut f: impl FnMut(usize, &[Event], &SlidingWindowState, &SparseUpdate) -> Result<()>) -> Result<()> {
        let mut win = self.window()?;
        for (step, chunk) in self.events.events().chunks(self.batch).enumerate() {
            let u = if chunk.len() == 1 { win.push_event(chunk[0])? } else { win.push_batch(chunk)? };
            f(step, chunk, &win, &u)?;
        }
        Ok(())
    }
}

fn total(trace: &[LayerTrace]) -> u64 {
    trace.iter().map(|t| t.counted).sum()
}

/// One forward of `mode` over the current window, returning output and trace.
fn forward(
    mode: Mode,
    net: &NetworkSpec<f32>,
    win: &SlidingWindowState,
    update: &SparseUpdate,
    state: &mut Option<NetworkState<f32>>,
) -> Result<(Vec<f32>, Vec<LayerTrace>)> {
    Ok(match mode {
        Mode::Dense => {
            let f = dense_forward(net, win.representation(), DenseSemantics::Submanifold)?;
            (f.output, f.trace)
        }
        Mode::Sparse => {
            let f = sparse_forward(net, win.representation())?;
            (f.output, f.trace)
        }
        Mode::Async => {
            let s = state.as_mut().expect("async state initialised");
            s.process_event(update)?;
            (s.output().to_vec(), s.last_trace().to_vec())
        }
    })
}

fn initial_state(mode: Mode, s: &Session) -> Result<Option<NetworkState<f32>>> {
    Ok(match mode {
        Mode::Async => Some(init_state(s.net.clone(), s.window()?.representation())?),
        _ => None,
    })
}

pub fn gen_events(a: GenEventsArgs) -> Result<()> {
    let seq = frames::load(&a.frames, a.width, a.height, a.num_frames)?;
    let stream = generate_events(&seq, a.threshold)?;
    write_events(&stream, &a.output).with_context(|| format!("writing {}", a.output.display()))?;
    Ok(())
}

pub fn gen_model(a: GenModelArgs) -> Result<()> {
    let t = ArchitectureTemplate::by_name(&a.template, a.width, a.height, a.repr.into())?
        .with_window(a.window.unwrap_or(DEFAULT_WINDOW));
    let seed = match a.seed {
        Some(s) => s,
        None => env_seed()?,
    };
    save_model(&random_model(seed, &t)?, &a.output).with_context(|| format!("writing {}", a.output.display()))?;
    Ok(())
}

pub fn run(a: RunArgs) -> Result<()> {
    let s = Session::open(&a.stream)?;
    let mode: Mode = a.mode.into();
    let outputs = s.net.output_len();
    let mut columns: Vec<String> = ["step", "events", "t", "active_sites", "flops"].map(String::from).to_vec();
    columns.extend((0..outputs).map(|i| format!("out_{i}")));
    let mut report = Report::new(columns);
    let mut state = initial_state(mode, &s)?;
    let mut seen = 0;
    s.for_each_step(|step, chunk, win, u| {
        let (out, trace) = forward(mode, &s.net, win, u, &mut state)?;
        seen += chunk.len();
        let active = win.representation().active_sites().len();
        let mut row: Vec<Cell> = vec![step.into(), seen.into(), chunk[chunk.len() - 1].t.into(), active.into(), total(&trace).into()];
        row.extend(out.iter().map(|&v| Cell::from(v)));
        report.push(row);
        Ok(())
    })?;
    report.write(a.output.as_deref(), a.json)
}

/// Largest `|a - b| / max(|a|, |b|, 1)` over two maps; infinite when their
/// active sets differ.
fn map_deviation(a: &SparseFeatureMap<f32>, b: &SparseFeatureMap<f32>) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut worst = 0.0f64;
    for &site in a.sites() {
        match (a.act_at(site), b.act_at(site)) {
            (Some(x), Some(y)) => worst = worst.max(max_rel_deviation(x, y, 1.0)),
            _ => return f64::INFINITY,
        }
    }
    worst
}

fn dense_deviation(d: &DenseMap<f32>, s: &SparseFeatureMap<f32>) -> f64 {
    max_rel_deviation(&d.act, &s.to_dense(), 1.0)
}

pub fn compare(a: CompareArgs) -> Result<()> {
    let s = Session::open(&a.stream)?;
    let net = s.net.clone();
    let mut report = Report::new([
        "step",
        "events",
        "layer",
        "kind",
        "dense_flops",
        "sparse_flops",
        "async_flops",
        "dev_async_sparse",
        "dev_dense_sparse",
    ]);
    let mut state = initial_state(Mode::Async, &s)?;
    let (mut seen, mut worst) = (0, 0.0f64);
    let last = net.layers.len() - 1;
    s.for_each_step(|step, chunk, win, u| {
        seen += chunk.len();
        let dense = dense_forward(&net, win.representation(), DenseSemantics::Submanifold)?;
        let sparse = sparse_forward(&net, win.representation())?;
        let st = state.as_mut().expect("async state");
        st.process_event(u)?;
        for (n, layer) in net.layers.iter().enumerate() {
            let (da, dd) = if n == last {
                (max_rel_deviation(st.output(), &sparse.output, 1.0), max_rel_deviation(&dense.output, &sparse.output, 1.0))
            } else {
                (map_deviation(st.map(n), &sparse.maps[n]), dense_deviation(&dense.maps[n], &sparse.maps[n]))
            };
            if n == last {
                worst = worst.max(da);
            }
            report.push(vec![
                step.into(),
                seen.into(),
                n.into(),
                layer.kind().name().into(),
                dense.trace[n].counted.into(),
                sparse.trace[n].counted.into(),
                st.last_trace()[n].counted.into(),
                da.into(),
                dd.into(),
            ]);
        }
        Ok(())
    })?;
    report.write(a.output.as_deref(), a.json)?;
    if a.output.is_some() {
        println!("max output deviation async vs sparse: {}", async_sparse::analysis::sig9(worst));
    }
    Ok(())
}

fn ledger_report(l: &FlopLedger) -> Report {
    let mut r = Report::new([
        "layer", "kind", "mode", "h_out", "w_out", "c_in", "c_out", "k", "n_rules", "n_active", "counted", "analytic",
    ]);
    for row in &l.rows {
        r.push(vec![
            row.layer.into(),
            row.kind.name().into(),
            row.mode.name().into(),
            row.h_out.into(),
            row.w_out.into(),
            row.c_in.into(),
            row.c_out.into(),
            row.k.into(),
            row.n_rules.into(),
            row.n_active.into(),
            row.counted.into(),
            row.analytic.into(),
        ]);
    }
    let mut tot = vec![Cell::from("total"), Cell::from(""), Cell::from(l.mode.name())];
    tot.extend((0..7).map(|_| Cell::Empty));
    tot.push(l.total_counted().into());
    tot.push(l.total_analytic().into());
    r.push(tot);
    r
}

pub fn flops(a: FlopsArgs) -> Result<()> {
    let mode: Mode = a.mode.into();
    let ledger = match &a.events {
        None => {
            if mode != Mode::Dense {
                bail!("{} FLOPs depend on the input; pass --events", mode.name());
            }
            let net = resolve_model(&a.model, a.width, a.height, a.repr.map(Into::into), a.window)?;
            analytic_dense_ledger(&net)?
        }
        Some(path) => {
            let s = Session::open(&StreamArgs {
                model: a.model.clone(),
                events: path.clone(),
                repr: a.repr,
                window: a.window,
                batch: a.batch,
                limit: a.limit,
            })?;
            let mut state = initial_state(mode, &s)?;
            let mut acc: Option<FlopLedger> = None;
            s.for_each_step(|_, _, win, u| {
                let (_, trace) = forward(mode, &s.net, win, u, &mut state)?;
                let l = ledger_for_run(&s.net, &trace)?;
                match acc.as_mut() {
                    Some(t) => t.accumulate(&l)?,
                    None => acc = Some(l),
                }
                Ok(())
            })?;
            acc.context("event stream is empty")?
        }
    };
    if let Some(r) = ledger.first_mismatch() {
        bail!("layer {}: counted {} differs from formula {}", r.layer, r.counted, r.analytic);
    }
    ledger_report(&ledger).write(a.output.as_deref(), a.json)
}

fn parse_center(s: &str) -> Result<Site> {
    let (x, y) = s.split_once(',').context("--center expects x,y")?;
    Ok(Site::new(x.trim().parse().context("bad x")?, y.trim().parse().context("bad y")?))
}

pub fn fractal(a: FractalArgs) -> Result<()> {
    let s = load_stream(&a.events, None)?;
    let (w, h) = (s.width(), s.height());
    let ev = s.events();
    let ev = match a.window {
        Some(n) if n < ev.len() => &ev[ev.len() - n..],
        _ => ev,
    };
    let rep = build(a.repr.into(), ev, w, h)?;
    let mask = ActiveMask::from_representation(&rep);
    let radii = a.radii.unwrap_or_else(|| default_radii(w, h));
    let est = match a.center.as_deref() {
        Some(c) => fractal_dimension(&mask, parse_center(c)?, &radii)?,
        None => {
            if mask.active_sites().is_empty() {
                bail!("no active sites");
            }
            fractal_dimension_mean(&mask, mask.active_sites(), &radii)?
        }
    };
    let mut r = Report::new(["radius", "side", "count", "ln_side", "ln_count", "gamma", "residual"]);
    for (&rad, &m) in est.radii.iter().zip(&est.counts) {
        let side = 2 * rad + 1;
        r.push(vec![
            rad.into(),
            side.into(),
            m.into(),
            (side as f64).ln().into(),
            if m > 0.0 { m.ln().into() } else { Cell::Empty },
            est.gamma.into(),
            est.residual.into(),
        ]);
    }
    r.write(a.output.as_deref(), a.json)
}
