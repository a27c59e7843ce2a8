use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use kpathprof::cfg::{parse_cfg, parse_edge_counts, to_dag, Cfg, DagCfg, EdgeKind};
use kpathprof::kipf::{make_k_ipf, KIpf};
use kpathprof::ksf::{KsfBuilder, KsfOptions};
use kpathprof::metrics::{compare_runs, to_float, BlppProfiler};
use kpathprof::numbering::{
    bl_number, decode_path, enumerate_paths, instrumentation_plan, smart_number,
    DEFAULT_ENUMERATION_CAP,
};
use kpathprof::oracle::{compare, ngram_count};
use kpathprof::tracer::{
    gen_trace, parse_trace, render_trace, replay, ReplayOptions, StreamReader,
};
use kpathprof::{Numbering, PathId, Routine, Stream, StreamItem};

use crate::Command;

pub enum Failure {
    Data(anyhow::Error),
    Mismatch(String),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.into())
    }
}

type Out = Box<dyn Write>;

pub fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Number { cfg, smart, paths } => number(&cfg, smart.as_deref(), paths)?,
        Command::Trace {
            cfg,
            trace,
            allow_partial,
            smart,
            output,
        } => trace_cmd(&cfg, &trace, allow_partial, smart.as_deref(), output)?,
        Command::Gen {
            cfg,
            weights,
            invocations,
            seed,
            max_steps,
            output,
        } => {
            let cfg = load_cfg(&cfg)?;
            let w = load_counts(&cfg, &weights)?;
            let trace = gen_trace(&cfg, &w, invocations, max_steps, seed)?;
            let mut out = output_to(output)?;
            out.write_all(render_trace(&cfg, &trace).as_bytes())?;
            out.flush()?;
        }
        Command::Ksf {
            input,
            k,
            dump,
            stats,
            move_to_front,
        } => ksf(&input.stream, k, dump || !stats, stats, move_to_front)?,
        Command::Profile {
            input,
            k,
            prune,
            top,
            min_depth,
            decode,
            smart,
            json,
        } => {
            let opts = ProfileOpts {
                prune,
                top,
                min_depth,
                decode,
                smart,
                json,
            };
            profile(&input.stream, k, &opts)?
        }
        Command::Oracle { input, k } => {
            let stream = read_stream(&input.stream)?;
            let table = ngram_count(&stream, k)?;
            let mut out = stdout();
            let mut last: Option<&Routine> = None;
            for (r, seq, c) in table.iter() {
                if last != Some(r) {
                    writeln!(out, "{r}")?;
                    last = Some(r);
                }
                writeln!(out, "{}:{c}", join(seq, " "))?;
            }
            out.flush()?;
        }
        Command::Verify { input, k } => {
            let stream = read_stream(&input.stream)?;
            let table = ngram_count(&stream, k)?;
            let ipf = kpathprof::kipf::profile_stream(&stream, k)?;
            match compare(&ipf, &table) {
                None => println!("ok: {} n-grams with n <= {k} match", table.len()),
                Some(m) => {
                    return Err(Failure::Mismatch(format!(
                        "mismatch in {}: <{}> expected {}, got {}",
                        m.routine,
                        join(&m.labels, ","),
                        m.expected,
                        m.actual
                    )))
                }
            }
        }
        Command::Stats { input, k, csv } => {
            let stream = read_stream(&input.stream)?;
            stats(&stream, &k, csv)?
        }
    }
    Ok(())
}

fn join<T: ToString>(xs: &[T], sep: &str) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(sep)
}

fn stdout() -> Out {
    Box::new(BufWriter::new(io::stdout().lock()))
}

fn output_to(path: Option<PathBuf>) -> anyhow::Result<Out> {
    match path {
        Some(p) if p.as_os_str() != "-" => {
            let f = File::create(&p).with_context(|| format!("cannot create {}", p.display()))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        _ => Ok(stdout()),
    }
}

fn open(path: &Path) -> anyhow::Result<Box<dyn BufRead>> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(BufReader::new(io::stdin())));
    }
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(Box::new(BufReader::new(f)))
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    let mut s = String::new();
    open(path)?
        .read_to_string(&mut s)
        .with_context(|| format!("cannot read {}", path.display()))?;
    Ok(s)
}

fn load_cfg(path: &Path) -> anyhow::Result<Cfg> {
    parse_cfg(&read_text(path)?).with_context(|| path.display().to_string())
}

fn load_counts(
    cfg: &Cfg,
    path: &Path,
) -> anyhow::Result<std::collections::HashMap<kpathprof::cfg::EdgeId, u64>> {
    parse_edge_counts(cfg, &read_text(path)?).with_context(|| path.display().to_string())
}

fn numbering(cfg: &Cfg, dag: &DagCfg, smart: Option<&Path>) -> anyhow::Result<Numbering> {
    Ok(match smart {
        Some(p) => smart_number(dag, &load_counts(cfg, p)?)?,
        None => bl_number(dag)?,
    })
}

fn stream_items(
    path: &Path,
) -> anyhow::Result<impl Iterator<Item = anyhow::Result<StreamItem<PathId>>>> {
    let name = path.display().to_string();
    Ok(StreamReader::new(open(path)?).map(move |r| r.with_context(|| name.clone())))
}

fn read_stream(path: &Path) -> anyhow::Result<Stream> {
    stream_items(path)?.collect()
}

fn number(path: &Path, smart: Option<&Path>, paths: bool) -> anyhow::Result<()> {
    let cfg = load_cfg(path)?;
    let dag = to_dag(&cfg)?;
    let ev = numbering(&cfg, &dag, smart)?;
    let mut out = stdout();
    writeln!(
        out,
        "cfg {}: {} blocks, {} edges, {} back edge(s), {} numbering",
        cfg.name(),
        cfg.num_blocks(),
        cfg.edges().len(),
        dag.back_edges().len(),
        if smart.is_some() {
            "smart"
        } else {
            "canonical"
        }
    )?;
    writeln!(out, "N = {}", ev.total_paths())?;
    writeln!(out)?;

    let rows: Vec<[String; 5]> = dag
        .edges()
        .iter()
        .map(|e| {
            let kind = match e.kind {
                EdgeKind::Real => "real".to_owned(),
                EdgeKind::DummyEntry { origin } => format!("entry-for-e{}", origin.0),
                EdgeKind::DummyExit { origin } => format!("exit-for-e{}", origin.0),
            };
            [
                format!("e{}", e.id.0),
                cfg.block_name(e.src).to_owned(),
                cfg.block_name(e.dst).to_owned(),
                kind,
                ev.val(e.id).map_or("-".into(), |v| v.to_string()),
            ]
        })
        .collect();
    let header = ["edge", "src", "dst", "kind", "val"].map(String::from);
    write_table(&mut out, &header, &rows)?;

    let plan = instrumentation_plan(&dag, &ev);
    writeln!(out)?;
    writeln!(
        out,
        "instrumentation: {} of {} edges probed",
        plan.len(),
        plan.real_edges
    )?;
    for &(id, v) in &plan.increments {
        let e = cfg.edge(id).unwrap();
        writeln!(out, "  e{:<4} {:<12} r += {v}", id.0, cfg.describe_edge(e))?;
    }
    for p in &plan.back_edges {
        let e = cfg.edge(p.edge).unwrap();
        writeln!(
            out,
            "  e{:<4} {:<12} count[r + {}]++; r = {}",
            p.edge.0,
            cfg.describe_edge(e),
            p.exit_val,
            p.entry_val
        )?;
    }
    writeln!(out, "  exit: count[r]++")?;

    if paths {
        writeln!(out)?;
        writeln!(out, "paths:")?;
        for (id, p) in enumerate_paths(&dag, &ev, DEFAULT_ENUMERATION_CAP)? {
            writeln!(out, "  {id:>5}  {}", p.render(&cfg))?;
        }
    }
    out.flush()?;
    Ok(())
}

fn write_table(out: &mut Out, header: &[String], rows: &[impl AsRef<[String]>]) -> io::Result<()> {
    let mut width: Vec<usize> = header.iter().map(String::len).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r.as_ref()) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: &[String]| {
        let s: Vec<String> = cells
            .iter()
            .zip(&width)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        s.join("  ").trim_end().to_owned()
    };
    writeln!(out, "{}", line(header))?;
    for r in rows {
        writeln!(out, "{}", line(r.as_ref()))?;
    }
    Ok(())
}

fn trace_cmd(
    cfg_path: &Path,
    trace_path: &Path,
    allow_partial: bool,
    smart: Option<&Path>,
    output: Option<PathBuf>,
) -> anyhow::Result<()> {
    let cfg = load_cfg(cfg_path)?;
    let dag = to_dag(&cfg)?;
    let ev = numbering(&cfg, &dag, smart)?;
    let trace = parse_trace(&cfg, &read_text(trace_path)?)
        .with_context(|| trace_path.display().to_string())?;
    let stream = replay(&dag, &ev, &trace, ReplayOptions { allow_partial })
        .with_context(|| trace_path.display().to_string())?;
    let mut out = output_to(output)?;
    write!(out, "{stream}")?;
    out.flush()?;
    Ok(())
}

fn ksf(path: &Path, k: usize, dump: bool, stats: bool, move_to_front: bool) -> anyhow::Result<()> {
    let mut b = KsfBuilder::with_options(k, KsfOptions { move_to_front })?;
    for item in stream_items(path)? {
        b.process(&item?)?;
    }
    let f = b.finish();
    let mut out = stdout();
    if dump {
        out.write_all(f.dump().as_bytes())?;
    }
    if stats {
        let s = f.hash_op_stats();
        writeln!(out, "k {k}")?;
        writeln!(out, "items {}", s.items)?;
        writeln!(out, "nodes {}", f.node_count())?;
        writeln!(out, "roots {}", s.root_count)?;
        writeln!(out, "hash finds {}", s.finds)?;
        writeln!(out, "hash inserts {}", s.inserts)?;
        writeln!(
            out,
            "max depth {}",
            f.max_depth().map_or("-".into(), |d| d.to_string())
        )?;
        writeln!(out, "max degree {}", f.max_degree())?;
        writeln!(out, "sibling visits {}", s.sibling_visits)?;
        writeln!(out, "max visits per item {}", s.max_item_visits)?;
    }
    out.flush()?;
    Ok(())
}

struct ProfileOpts {
    prune: Option<f64>,
    top: Option<usize>,
    min_depth: usize,
    decode: Option<PathBuf>,
    smart: Option<PathBuf>,
    json: bool,
}

/// Renders path IDs of a matching routine as block sequences.
struct Decoder {
    cfg: Cfg,
    dag: DagCfg,
    ev: Numbering,
}

impl Decoder {
    fn load(path: &Path, smart: Option<&Path>) -> anyhow::Result<Self> {
        let cfg = load_cfg(path)?;
        let dag = to_dag(&cfg)?;
        let ev = numbering(&cfg, &dag, smart)?;
        Ok(Decoder { cfg, dag, ev })
    }

    fn applies(&self, r: &Routine) -> bool {
        r.as_str().is_empty() || r.as_str() == self.cfg.name()
    }

    fn render(&self, r: &Routine, id: PathId) -> anyhow::Result<Option<String>> {
        if !self.applies(r) {
            return Ok(None);
        }
        let p = decode_path(id, &self.dag, &self.ev)
            .with_context(|| format!("decoding path {id} of {r} with cfg {}", self.cfg.name()))?;
        Ok(Some(p.render(&self.cfg)))
    }
}

fn profile(path: &Path, k: usize, opts: &ProfileOpts) -> anyhow::Result<()> {
    let decoder = match &opts.decode {
        Some(p) => Some(Decoder::load(p, opts.smart.as_deref())?),
        None => None,
    };
    let mut ipf: KIpf<PathId> = if k == 1 {
        let mut p = BlppProfiler::new();
        for item in stream_items(path)? {
            p.process(&item?);
        }
        KIpf::from_counts(p.into_counts())
    } else {
        let mut b = KsfBuilder::new(k)?;
        for item in stream_items(path)? {
            b.process(&item?)?;
        }
        make_k_ipf(&b.finish())?
    };
    if let Some(f) = opts.prune {
        ipf = ipf.prune(f)?;
    }
    if let Some(d) = &decoder {
        // fail before printing anything if an ID does not decode
        for (r, labels, _) in ipf.label_paths() {
            for id in labels {
                d.render(&r, id)?;
            }
        }
    }
    let decoded = |r: &Routine, id: PathId| {
        decoder
            .as_ref()
            .and_then(|d| d.render(r, id).ok().flatten())
    };

    let mut out = stdout();
    match (opts.top, opts.json) {
        (Some(n), json) => {
            let top = ipf.top_paths(n, opts.min_depth);
            if json {
                serde_json::to_writer_pretty(&mut out, &top)?;
                writeln!(out)?;
            } else {
                for h in &top {
                    write!(
                        out,
                        "{}\t{}\t<{}>",
                        h.count,
                        h.routine,
                        join(&h.labels, ",")
                    )?;
                    if decoder.is_some() {
                        let blocks: Vec<String> = h
                            .labels
                            .iter()
                            .filter_map(|&id| decoded(&h.routine, id))
                            .collect();
                        if !blocks.is_empty() {
                            write!(out, "\t{}", blocks.join(" | "))?;
                        }
                    }
                    writeln!(out)?;
                }
            }
        }
        (None, true) => {
            serde_json::to_writer_pretty(&mut out, &ipf.to_json_view())?;
            writeln!(out)?;
        }
        (None, false) => {
            let text = ipf.dump_with(|r, id| decoded(r, id).map(|s| format!("[{s}]")));
            out.write_all(text.as_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

fn stats(stream: &Stream, ks: &[usize], csv_path: Option<PathBuf>) -> anyhow::Result<()> {
    let t = compare_runs(stream, ks)?;
    let mut out = stdout();
    writeln!(
        out,
        "blpp: {} table entries, {} hash ops",
        t.baseline.table_entries, t.baseline.hash_ops
    )?;
    writeln!(out, "# leaf depth counts roots as depth 1")?;
    let ratio = |r: Option<_>| r.map_or("-".to_owned(), |r| format!("{:.3}", to_float::<f64>(r)));
    let header = [
        "k",
        "ksf_nodes",
        "ksf_roots",
        "kipf_nodes",
        "kipf_roots",
        "hash_finds",
        "max_degree",
        "ksf_avg_degree",
        "kipf_avg_degree",
        "avg_leaf_depth",
        "space_blowup",
        "path_blowup",
    ]
    .map(String::from);
    let rows: Vec<Vec<String>> = t
        .rows
        .iter()
        .map(|r| {
            vec![
                r.k.to_string(),
                r.ksf_nodes.to_string(),
                r.ksf_roots.to_string(),
                r.kipf_nodes.to_string(),
                r.kipf_roots.to_string(),
                r.hash_finds.to_string(),
                r.max_degree.to_string(),
                ratio(r.avg_ksf_internal_degree),
                ratio(r.avg_kipf_internal_degree),
                ratio(r.avg_leaf_depth),
                ratio(r.space_blowup),
                ratio(r.path_blowup),
            ]
        })
        .collect();
    write_table(&mut out, &header, &rows)?;
    out.flush()?;

    if let Some(p) = csv_path {
        let exact = |r: Option<_>| r.map_or(String::new(), |r| to_float::<f64>(r).to_string());
        let mut w =
            csv::Writer::from_path(&p).with_context(|| format!("cannot create {}", p.display()))?;
        let write = |w: &mut csv::Writer<File>, rec: Vec<String>| {
            w.write_record(rec)
                .map_err(|e| anyhow!("writing {}: {e}", p.display()))
        };
        let mut head: Vec<String> = header.to_vec();
        head.extend(
            [
                "hash_inserts",
                "max_item_visits",
                "blpp_table_entries",
                "blpp_hash_ops",
            ]
            .map(String::from),
        );
        write(&mut w, head)?;
        for (r, cells) in t.rows.iter().zip(rows) {
            let mut rec = cells[..7].to_vec();
            rec.extend([
                exact(r.avg_ksf_internal_degree),
                exact(r.avg_kipf_internal_degree),
                exact(r.avg_leaf_depth),
                exact(r.space_blowup),
                exact(r.path_blowup),
                r.hash_inserts.to_string(),
                r.max_item_visits.to_string(),
                t.baseline.table_entries.to_string(),
                t.baseline.hash_ops.to_string(),
            ]);
            write(&mut w, rec)?;
        }
        w.flush()?;
    }
    Ok(())
}
