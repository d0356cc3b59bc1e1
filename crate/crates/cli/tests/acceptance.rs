//! Acceptance gate. Prints one `[PASS]`/`[FAIL]` line per criterion and exits
//! nonzero when any criterion fails.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use mevhas_core::codec::{encode_frame, encode_sequence, Cu, EncoderConfig, PartitionRecord};
use mevhas_core::ladder::{
    compare_reports, plan_ladder, run_ladder, LadderMode, LadderReport, Role, TIMING_FIELDS,
};
use mevhas_core::media::{write_y4m, Chroma, Fps, LumaFrame, VideoSequence};
use mevhas_core::metrics::{
    bd_rate, bd_rate_trapezoid, bd_time, complexity_features, RdCurvePoint,
};
use mevhas_core::partition::{extract_map, interpolate_2x, CuDims, PartitionMap};
use mevhas_core::policy::{gate, FullRdoPolicy, GateDecision, GateInput, GatingPolicy, MapPolicy};
use mevhas_core::synth::{constant_clip, textured_clip};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || {
        format!("took {elapsed:.2?}, limit {limit:?}")
    })
}

fn desk_corpus() -> Vec<Arc<VideoSequence>> {
    (1..=3)
        .map(|seed| Arc::new(textured_clip(256, 128, 5, seed)))
        .collect()
}

const QPS: [u8; 4] = [27, 32, 37, 42];

fn c1_gate_table() -> Outcome {
    let start = Instant::now();
    let areas: Vec<usize> = (6..=14).map(|k| 1usize << k).collect();
    let mut cases = 0;
    for &curr in &areas {
        for &max in &areas {
            for restricted in [false, true] {
                let log_gap = curr.trailing_zeros() as i32 - max.trailing_zeros() as i32;
                let expected = match (restricted, log_gap) {
                    (true, _) => GateDecision::DefaultRdo,
                    (false, g) if g > 0 => GateDecision::SkipModesAllowSplit,
                    (false, g) if g >= -2 => GateDecision::FullRdo,
                    _ => GateDecision::Prune,
                };
                let got = gate(GateInput {
                    curr_sz: curr,
                    max_sz: max,
                    qt_restricted: restricted,
                });
                ensure(got == expected, || {
                    format!(
                        "curr {curr} max {max} restricted {restricted}: {got:?} != {expected:?}"
                    )
                })?;
                cases += 1;
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("{cases} cases, 0 deviations"))
}

fn c2_baseline_equivalence(corpus: &[Arc<VideoSequence>]) -> Outcome {
    let start = Instant::now();
    let results: Vec<Result<usize, String>> = std::thread::scope(|s| {
        let handles: Vec<_> = corpus
            .iter()
            .enumerate()
            .map(|(i, clip)| {
                s.spawn(move || {
                    let mut frames = 0;
                    for qp in QPS {
                        let cfg = EncoderConfig::new(qp);
                        let plain =
                            encode_sequence(clip, &cfg, |_| None).map_err(|e| e.to_string())?;
                        let full = encode_sequence(clip, &cfg, |_| {
                            Some(&FullRdoPolicy as &dyn GatingPolicy)
                        })
                        .map_err(|e| e.to_string())?;
                        for (f, (a, b)) in plain.frames.iter().zip(&full.frames).enumerate() {
                            ensure(a.record == b.record, || {
                                format!("clip {i} QP {qp} frame {f}: records differ")
                            })?;
                            ensure(a.stats.without_timing() == b.stats.without_timing(), || {
                                format!("clip {i} QP {qp} frame {f}: stats differ")
                            })?;
                            ensure(a.recon == b.recon, || {
                                format!("clip {i} QP {qp} frame {f}: recon differs")
                            })?;
                            frames += 1;
                        }
                    }
                    Ok(frames)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker"))
            .collect()
    });
    let mut frames = 0;
    for r in results {
        frames += r?;
    }
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!("{frames} frame encodes identical across 4 QPs"))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

struct CorpusRuns {
    baseline: Vec<LadderReport>,
    mevhas: Vec<LadderReport>,
    baseline_time: BTreeMap<u8, Vec<f64>>,
    mevhas_time: BTreeMap<u8, Vec<f64>>,
}

fn run_corpus(corpus: &[Arc<VideoSequence>], runs: usize) -> Result<CorpusRuns, String> {
    let mut out = CorpusRuns {
        baseline: Vec::new(),
        mevhas: Vec::new(),
        baseline_time: BTreeMap::new(),
        mevhas_time: BTreeMap::new(),
    };
    for run in 0..runs {
        let mut bt: BTreeMap<u8, f64> = BTreeMap::new();
        let mut mt: BTreeMap<u8, f64> = BTreeMap::new();
        for clip in corpus {
            for mode in [LadderMode::Baseline, LadderMode::Mevhas] {
                let plan = plan_ladder(clip.clone(), &QPS, mode).map_err(|e| e.to_string())?;
                let rep = run_ladder(&plan, 1).map_err(|e| e.to_string())?;
                let times = if mode == LadderMode::Baseline {
                    &mut bt
                } else {
                    &mut mt
                };
                for r in rep.dependents() {
                    *times.entry(r.qp).or_default() += r.wall_s;
                }
                if run == 0 {
                    match mode {
                        LadderMode::Baseline => out.baseline.push(rep),
                        LadderMode::Mevhas => out.mevhas.push(rep),
                    }
                }
            }
        }
        for (qp, t) in bt {
            out.baseline_time.entry(qp).or_default().push(t);
        }
        for (qp, t) in mt {
            out.mevhas_time.entry(qp).or_default().push(t);
        }
    }
    Ok(out)
}

fn c3_acceleration(runs: &CorpusRuns) -> Outcome {
    let base: u64 = runs
        .baseline
        .iter()
        .map(|r| r.totals.dependent_mode_evaluations)
        .sum();
    let mev: u64 = runs
        .mevhas
        .iter()
        .map(|r| r.totals.dependent_mode_evaluations)
        .sum();
    let reduction = 100.0 * (base as f64 - mev as f64) / base as f64;
    let mut detail = format!("mode evaluations {base} -> {mev} ({reduction:.2}% fewer)");
    let mut failures = Vec::new();
    if reduction < 15.0 {
        failures.push(format!("evaluation reduction {reduction:.2}% < 15%"));
    }
    for qp in QPS {
        let b = median(runs.baseline_time[&qp].clone());
        let m = median(runs.mevhas_time[&qp].clone());
        detail.push_str(&format!("; QP {qp} median {b:.3}s -> {m:.3}s"));
        if (qp == 27 || qp == 32) && m >= b {
            failures.push(format!(
                "QP {qp} median wall time not lower ({b:.3}s -> {m:.3}s)"
            ));
        }
    }
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{}; {detail}", failures.join("; ")))
    }
}

fn curve(rep: &LadderReport) -> Vec<RdCurvePoint> {
    rep.dependents()
        .map(|r| RdCurvePoint::new(r.bitrate_bps, r.psnr_db.unwrap_or(f64::INFINITY)))
        .collect()
}

fn c4_quality_bound(runs: &CorpusRuns) -> Outcome {
    let mut parts = Vec::new();
    for (i, (b, m)) in runs.baseline.iter().zip(&runs.mevhas).enumerate() {
        let cubic = bd_rate(&curve(b), &curve(m)).map_err(|e| format!("clip {i}: {e}"))?;
        let trap = bd_rate_trapezoid(&curve(b), &curve(m)).map_err(|e| format!("clip {i}: {e}"))?;
        let reported = compare_reports(b, m).map_err(|e| e.to_string())?.bd.bd_rate;
        ensure((reported - cubic).abs() < 1e-9, || {
            format!("clip {i}: comparison report BDBR {reported} != {cubic}")
        })?;
        ensure(cubic <= 10.0, || {
            format!("clip {i}: BDBR {cubic:.3}% > 10%")
        })?;
        ensure((cubic - trap).abs() <= 0.5, || {
            format!("clip {i}: cubic {cubic:.3}% vs trapezoid {trap:.3}%")
        })?;
        parts.push(format!("clip {i} BDBR {cubic:.3}% (trapezoid {trap:.3}%)"));
    }
    Ok(parts.join("; "))
}

fn c5_bd_fixtures() -> Outcome {
    let start = Instant::now();
    let q = [30.0, 33.5, 36.2, 39.9];
    let rates = [1000.0, 2100.0, 4000.0, 8500.0];
    let pts = |f: f64| -> Vec<RdCurvePoint> {
        rates
            .iter()
            .zip(q)
            .map(|(&r, q)| RdCurvePoint::new(r * f, q))
            .collect()
    };
    let anchor = pts(1.0);
    let shift = bd_rate(&anchor, &pts(1.10)).map_err(|e| e.to_string())?;
    ensure((shift - 10.0).abs() <= 1e-6, || {
        format!("x1.10 shift gave {shift}")
    })?;
    let ident = bd_rate(&anchor, &anchor).map_err(|e| e.to_string())?;
    ensure(ident.abs() <= 1e-9, || format!("identity gave {ident}"))?;

    let other: Vec<RdCurvePoint> = [1150.0, 2200.0, 4700.0, 9100.0]
        .iter()
        .zip([30.4, 33.1, 36.9, 39.5])
        .map(|(&r, q)| RdCurvePoint::new(r, q))
        .collect();
    let ab = bd_rate(&anchor, &other).map_err(|e| e.to_string())?;
    let ba = bd_rate(&other, &anchor).map_err(|e| e.to_string())?;
    let product = (1.0 + ab / 100.0) * (1.0 + ba / 100.0);
    ensure((product - 1.0).abs() <= 1e-9, || {
        format!("symmetry product {product}")
    })?;

    let half = bd_time(&anchor, &pts(0.5)).map_err(|e| e.to_string())?;
    ensure((half - 50.0).abs() <= 1e-6, || {
        format!("time halving gave {half}")
    })?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!(
        "shift {shift:.6}, identity {ident:.1e}, symmetry {product:.12}, halving {half:.6}"
    ))
}

/// Random legal partition of one CTU at (`x`, `y`).
fn random_partition(
    rng: &mut StdRng,
    x: usize,
    y: usize,
    w: usize,
    h: usize,
    mt: bool,
    out: &mut Vec<Cu>,
) {
    let mut options: Vec<u8> = vec![0];
    if !mt && w == h && w >= 16 {
        options.extend([1, 1]);
    }
    if h >= 16 {
        options.push(2);
    }
    if w >= 16 {
        options.push(3);
    }
    if h >= 32 {
        options.push(4);
    }
    if w >= 32 {
        options.push(5);
    }
    match options[rng.random_range(0..options.len())] {
        0 => out.push(Cu {
            x,
            y,
            width: w,
            height: h,
        }),
        1 => {
            let (hw, hh) = (w / 2, h / 2);
            for (dx, dy) in [(0, 0), (hw, 0), (0, hh), (hw, hh)] {
                random_partition(rng, x + dx, y + dy, hw, hh, false, out);
            }
        }
        2 => {
            random_partition(rng, x, y, w, h / 2, true, out);
            random_partition(rng, x, y + h / 2, w, h / 2, true, out);
        }
        3 => {
            random_partition(rng, x, y, w / 2, h, true, out);
            random_partition(rng, x + w / 2, y, w / 2, h, true, out);
        }
        4 => {
            let q = h / 4;
            random_partition(rng, x, y, w, q, true, out);
            random_partition(rng, x, y + q, w, 2 * q, true, out);
            random_partition(rng, x, y + 3 * q, w, q, true, out);
        }
        _ => {
            let q = w / 4;
            random_partition(rng, x, y, q, h, true, out);
            random_partition(rng, x + q, y, 2 * q, h, true, out);
            random_partition(rng, x + 3 * q, y, q, h, true, out);
        }
    }
}

fn c6_interpolation_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut cells_checked = 0usize;
    for case in 0..200 {
        let w = 128 * rng.random_range(1..=3);
        let h = 128 * rng.random_range(1..=2);
        let mut cus = Vec::new();
        for cy in (0..h).step_by(128) {
            for cx in (0..w).step_by(128) {
                random_partition(&mut rng, cx, cy, 128, 128, false, &mut cus);
            }
        }
        // Point-in-rectangle owner of every low-resolution pixel.
        let mut owner = vec![usize::MAX; w * h];
        for (i, cu) in cus.iter().enumerate() {
            for y in cu.y..cu.y + cu.height {
                for x in cu.x..cu.x + cu.width {
                    ensure(owner[y * w + x] == usize::MAX, || {
                        format!("case {case}: generator overlap")
                    })?;
                    owner[y * w + x] = i;
                }
            }
        }
        let record = PartitionRecord { cus: cus.clone() };
        let low = extract_map(&record, w, h, 37).map_err(|e| format!("case {case}: {e}"))?;
        for y in 0..h {
            for x in 0..w {
                let cu = &cus[owner[y * w + x]];
                let got = low.cell(x / 8, y / 8);
                ensure(got == CuDims::new(cu.width, cu.height), || {
                    format!(
                        "case {case}: extract at ({x}, {y}) {got:?} != {}x{}",
                        cu.width, cu.height
                    )
                })?;
            }
        }
        let high = interpolate_2x(&low);
        ensure(
            high.frame_width() == 2 * w && high.frame_height() == 2 * h,
            || format!("case {case}: interpolated size"),
        )?;
        for py in 0..2 * h {
            for px in 0..2 * w {
                let cu = &cus[owner[(py / 2) * w + px / 2]];
                let want = CuDims::new((2 * cu.width).min(128), (2 * cu.height).min(128));
                let got = high.cell(px / 8, py / 8);
                ensure(got == want, || {
                    format!("case {case}: interpolated at ({px}, {py}) {got:?} != {want:?}")
                })?;
                let area = high.max_sz(px, py).map_err(|e| e.to_string())?.area();
                ensure(area == want.area(), || {
                    format!("case {case}: max_sz at ({px}, {py})")
                })?;
                cells_checked += 1;
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!(
        "200 records, {cells_checked} interpolated pixels checked"
    ))
}

fn random_map(rng: &mut StdRng, pw: usize, ph: usize, kind: u8) -> PartitionMap {
    let sizes = [8, 16, 32, 64, 128];
    match kind {
        0 => PartitionMap::uniform(pw, ph, 37, CuDims::new(8, 8)),
        1 => {
            let w = sizes[rng.random_range(0..5)];
            let h = sizes[rng.random_range(0..5)];
            PartitionMap::uniform(pw, ph, 37, CuDims::new(w, h))
        }
        _ => {
            let mut map = PartitionMap::uniform(pw, ph, 37, CuDims::new(8, 8));
            let (cols, rows) = map.grid_dims();
            for r in 0..rows {
                for c in 0..cols {
                    let d =
                        CuDims::new(sizes[rng.random_range(0..5)], sizes[rng.random_range(0..5)]);
                    map.set_cell(c, r, d);
                }
            }
            map
        }
    }
}

fn c7_tiling_safety() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x7111);
    let mut fallbacks = 0u64;
    let mut pruned_maps = 0;
    for case in 0..500 {
        let w = 2 * rng.random_range(4..=48);
        let h = 2 * rng.random_range(4..=40);
        let frame = if rng.random_bool(0.5) {
            LumaFrame::from_fn(w, h, |_, _| rng.random()).map_err(|e| e.to_string())?
        } else {
            textured_clip(w, h, 1, rng.random()).frames()[0].clone()
        };
        let qp = rng.random_range(0..=51);
        let cfg = EncoderConfig::new(qp);
        let (pw, ph) = cfg.padded_dims(w, h);
        let kind = rng.random_range(0..4u8);
        let policy =
            (kind < 3).then(|| MapPolicy::new(Arc::new(random_map(&mut rng, pw, ph, kind))));
        if kind == 0 {
            pruned_maps += 1;
        }
        let enc = encode_frame(
            &frame,
            &cfg,
            policy.as_ref().map(|p| p as &dyn GatingPolicy),
        )
        .map_err(|e| format!("case {case}: {e}"))?;
        enc.record
            .check_tiling(pw, ph)
            .map_err(|e| format!("case {case} ({w}x{h} QP {qp} map kind {kind}): {e}"))?;
        ensure(enc.stats.fallbacks <= enc.stats.nodes_visited, || {
            format!(
                "case {case}: fallback count {} unbounded",
                enc.stats.fallbacks
            )
        })?;
        fallbacks += enc.stats.fallbacks;
    }
    Ok(format!(
        "500 encodes tile exactly ({pruned_maps} with all-8x8 maps); fallbacks to full search: {fallbacks}"
    ))
}

fn strip_timing_json(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(m) => {
            m.retain(|k, _| !TIMING_FIELDS.contains(&k.as_str()));
            m.values_mut().for_each(strip_timing_json);
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(strip_timing_json),
        _ => {}
    }
}

fn strip_timing_csv(text: &str) -> String {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    let keep: Vec<bool> = header.iter().map(|h| !TIMING_FIELDS.contains(h)).collect();
    std::iter::once(text.lines().next().unwrap_or_default())
        .chain(lines)
        .map(|l| {
            l.split(',')
                .zip(&keep)
                .filter(|(_, k)| **k)
                .map(|(f, _)| f)
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn non_timing_contents(dir: &Path) -> Result<BTreeMap<PathBuf, String>, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let text = fs::read_to_string(&path).map_err(|e| e.to_string())?;
            let normalized = match path.extension().and_then(|e| e.to_str()) {
                Some("json") => {
                    let mut v: serde_json::Value =
                        serde_json::from_str(&text).map_err(|e| e.to_string())?;
                    strip_timing_json(&mut v);
                    v.to_string()
                }
                Some("csv") => strip_timing_csv(&text),
                _ => text,
            };
            out.insert(
                path.strip_prefix(dir).expect("under dir").to_path_buf(),
                normalized,
            );
        }
    }
    Ok(out)
}

fn c8_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let clip = dir.path().join("clip.y4m");
    let seq = textured_clip(256, 128, 2, 11);
    write_y4m(
        &seq,
        Chroma::C420,
        BufWriter::new(File::create(&clip).map_err(|e| e.to_string())?),
    )
    .map_err(|e| e.to_string())?;
    let out = dir.path().join("out");
    let mut snapshots = Vec::new();
    for (i, jobs) in ["1", "1", "4"].iter().enumerate() {
        let status = Command::new(env!("CARGO_BIN_EXE_mevhas"))
            .args([
                "ladder",
                "--input",
                clip.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ])
            .args(["--mode", "both", "--jobs", jobs])
            .output()
            .map_err(|e| e.to_string())?;
        ensure(status.status.success(), || {
            format!("jobs={jobs}: {}", String::from_utf8_lossy(&status.stderr))
        })?;
        let kept = dir.path().join(format!("run{i}"));
        fs::rename(&out, &kept).map_err(|e| e.to_string())?;
        snapshots.push(non_timing_contents(&kept)?);
    }
    let files = snapshots[0].len();
    ensure(files >= 7, || format!("only {files} output files"))?;
    for (i, s) in snapshots.iter().enumerate().skip(1) {
        ensure(s.keys().eq(snapshots[0].keys()), || {
            format!("run {i}: different file set")
        })?;
        for (name, text) in s {
            ensure(*text == snapshots[0][name], || {
                format!("run {i}: {} differs outside timing fields", name.display())
            })?;
        }
    }
    Ok(format!(
        "{files} files identical across jobs=1, jobs=1, jobs=4"
    ))
}

fn c9_complexity() -> Outcome {
    let flat = complexity_features(&constant_clip(256, 128, 5, 117));
    ensure(flat.e == 0.0 && flat.h == 0.0, || {
        format!("constant clip gave {flat:?}")
    })?;
    let still = textured_clip(256, 128, 1, 4).frames()[0].clone();
    let seq = VideoSequence::new(vec![still; 5], Fps::new(30, 1).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let f = complexity_features(&seq);
    ensure(f.h == 0.0 && f.e > 0.0, || {
        format!("static textured clip gave {f:?}")
    })?;
    Ok(format!(
        "constant (0, 0); static textured (E {:.4}, h 0)",
        f.e
    ))
}

fn c10_reference_plan() -> Outcome {
    let src = Arc::new(textured_clip(256, 128, 1, 2));
    let plan = plan_ladder(src, &QPS, LadderMode::Mevhas).map_err(|e| e.to_string())?;
    let refs: Vec<_> = plan
        .representations
        .iter()
        .filter(|r| r.role == Role::Reference)
        .collect();
    let ref_qps: Vec<u8> = refs.iter().map(|r| r.qp).collect();
    ensure(
        ref_qps.len() == 2 && ref_qps.contains(&37) && ref_qps.contains(&32),
        || format!("reference QPs {ref_qps:?}"),
    )?;
    ensure(
        refs.iter().all(|r| (r.width, r.height) == (128, 64)),
        || "reference size".into(),
    )?;
    let want: BTreeMap<u8, u8> = [(42, 37), (37, 37), (32, 37), (27, 32)].into();
    let mut links = Vec::new();
    for d in plan
        .representations
        .iter()
        .filter(|r| r.role == Role::Dependent)
    {
        let link = d
            .reference_id
            .as_deref()
            .ok_or("dependent without reference")?;
        let r = refs
            .iter()
            .find(|r| r.id == link)
            .ok_or_else(|| format!("QP {} links to unknown {link}", d.qp))?;
        ensure(want.get(&d.qp) == Some(&r.qp), || {
            format!("QP {} uses reference QP {}", d.qp, r.qp)
        })?;
        links.push(format!("{}->{}", d.qp, r.qp));
    }
    ensure(links.len() == 4, || format!("{} dependents", links.len()))?;
    Ok(format!("references {{37, 32}}; links {}", links.join(", ")))
}

fn report(name: &str, outcome: std::thread::Result<Outcome>, failed: &mut usize) {
    match outcome {
        Ok(Ok(detail)) => println!("[PASS] {name}: {detail}"),
        Ok(Err(why)) => {
            *failed += 1;
            println!("[FAIL] {name}: {why}");
        }
        Err(_) => {
            *failed += 1;
            println!("[FAIL] {name}: panicked");
        }
    }
}

fn guarded<T>(f: impl FnOnce() -> T) -> std::thread::Result<T> {
    panic::catch_unwind(AssertUnwindSafe(f))
}

fn main() {
    let corpus = desk_corpus();
    let mut failed = 0;
    report(
        "C1 gate decision table",
        guarded(c1_gate_table),
        &mut failed,
    );
    report(
        "C2 baseline equivalence",
        guarded(|| c2_baseline_equivalence(&corpus)),
        &mut failed,
    );
    match guarded(|| run_corpus(&corpus, 3)) {
        Ok(Ok(runs)) => {
            report(
                "C3 acceleration",
                guarded(|| c3_acceleration(&runs)),
                &mut failed,
            );
            report(
                "C4 quality bound",
                guarded(|| c4_quality_bound(&runs)),
                &mut failed,
            );
        }
        Ok(Err(e)) => {
            report("C3 acceleration", Ok(Err(e.clone())), &mut failed);
            report("C4 quality bound", Ok(Err(e)), &mut failed);
        }
        Err(_) => {
            report(
                "C3 acceleration",
                Ok(Err("ladder run panicked".into())),
                &mut failed,
            );
            report(
                "C4 quality bound",
                Ok(Err("ladder run panicked".into())),
                &mut failed,
            );
        }
    }
    report("C5 BD metrics", guarded(c5_bd_fixtures), &mut failed);
    report(
        "C6 interpolation oracle",
        guarded(c6_interpolation_oracle),
        &mut failed,
    );
    report("C7 tiling safety", guarded(c7_tiling_safety), &mut failed);
    report("C8 determinism", guarded(c8_determinism), &mut failed);
    report(
        "C9 complexity features",
        guarded(c9_complexity),
        &mut failed,
    );
    report(
        "C10 reference QP rule",
        guarded(c10_reference_plan),
        &mut failed,
    );
    println!("{} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
