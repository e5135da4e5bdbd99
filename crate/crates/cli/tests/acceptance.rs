//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::{naive_f3d, random_kspace, random_stack, rel_l2_err, rel_max_err, rng, shape, tv_prox_oracle};
use rand::Rng;
use smslab::io::VolumeFile;
use smslab::metrics::{
    fail_flag, loss_eval, mse, nmse, paired_ttest, psnr, ssim, ssim_image, temporal_tv, LossWeights,
};
use smslab::phantom::{gen_phantom, PhantomSpec};
use smslab::recon::{
    cascade_recon, cascade_recon_multicoil, data_consistency, grid_search_weights, prox_gradient_solve, tv_objective,
    tv_prox_1d, zero_filled, DenoiserSpec, ReconConfig, SliceMode, ValidationCase,
};
use smslab::sampling::{acquired_lines, apply_mask, embed_sms_mask, MaskSpec, SamplingMask};
use smslab::synth::{
    csm_circular, csm_gaussian, grating_phase, kmeans3d, sample_cluster_phases, synthesize_kspace, CsmKind,
    GaussianCsmRanges, SynthConfig,
};
use smslab::transforms::{
    acquire_sms_lines, embed_composite, f3d, f3d_inverse, fft2, fft2_stack, rss_combine, Direction,
};
use smslab::{Complex, ComplexVolume, Dims, Domain, ImageStack, KSpaceVolume, RealStack, Stack, StackShape};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn run(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let result = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
        Err(format!("panicked: {}", msg.unwrap_or_default()))
    });
    let secs = start.elapsed().as_secs_f64();
    let (tag, detail) = match &result {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("{tag} criterion {id:>2} {name}: {detail} [{secs:.2} s]");
    result.is_ok()
}

fn measure(x: &ImageStack, u: &SamplingMask) -> KSpaceVolume {
    apply_mask(&f3d(x).unwrap(), u).unwrap()
}

fn sms_equivalence() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1001);
    let mut worst = 0.0f64;
    let mut trials = 0;
    for m in 1..=4 {
        for _ in 0..20 {
            let (a, b, t) = (r.random_range(1..=16), r.random_range(1..=16), r.random_range(1..=4));
            let rate = r.random_range(1..=a.min(4));
            let spec = MaskSpec { interleave_step: r.random_range(1..=rate), ..MaskSpec::new(rate, m, a, b, t) };
            let x = random_stack(&mut r, shape(m, a, b, t));
            let composite = acquire_sms_lines(&x, acquired_lines(&spec).unwrap()).unwrap();
            let acquired = embed_composite(&composite, m).unwrap();
            let masked = apply_mask(&naive_f3d(&x), &embed_sms_mask(&spec).unwrap()).unwrap();
            let expected = masked.scaled(Complex::new((m as f64).sqrt(), 0.0));
            let err = rel_max_err(&acquired, &expected);
            ensure!(err < 1e-10, "M={m} ({a},{b},{t}) R={rate}: relative error {err:.2e}");
            worst = worst.max(err);
            trials += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!("{trials} trials, max relative error {worst:.2e}"))
}

fn transform_suite() -> Outcome {
    let shapes = [(1, 4, 4, 2), (2, 8, 6, 3), (3, 5, 7, 2), (4, 16, 16, 4), (2, 9, 12, 5), (1, 1, 1, 1)];
    let mut r = rng(1002);
    let mut worst = 0.0f64;
    let (alpha, beta) = (Complex::new(0.7, -1.3), Complex::new(-2.1, 0.4));
    for (m, a, b, t) in shapes {
        let s = shape(m, a, b, t);
        let (x, z) = (random_stack(&mut r, s), random_stack(&mut r, s));
        let y = random_kspace(&mut r, s);
        let fx = f3d(&x).unwrap();
        let unitary = (fx.norm_sqr() - x.norm_sqr()).abs() / x.norm_sqr();
        let adjoint = (fx.inner(&y) - x.inner(&f3d_inverse(&y).unwrap())).norm() / (x.norm() * y.norm());
        let lhs = f3d(&x.combine(alpha, &z, beta)).unwrap();
        let linear = rel_max_err(&lhs, &fx.combine(alpha, &f3d(&z).unwrap(), beta));
        let roundtrip = rel_max_err(&f3d_inverse(&fx).unwrap(), &x);
        let v = x.slice(0);
        let fv = fft2(v, Direction::Forward).unwrap();
        let parseval = (fv.norm_sqr() - v.norm_sqr()).abs() / v.norm_sqr();
        for (what, e) in [
            ("unitarity", unitary),
            ("adjointness", adjoint),
            ("linearity", linear),
            ("roundtrip", roundtrip),
            ("parseval", parseval),
        ] {
            ensure!(e < 1e-12, "{what} on {s}: {e:.2e}");
            worst = worst.max(e);
        }
    }
    Ok(format!("{} shapes, worst relative error {worst:.2e}", shapes.len()))
}

fn phantom_case(slices: usize, size: usize, frames: usize, rate: usize, seed: u64) -> ValidationCase {
    let mags = gen_phantom(&PhantomSpec::cine(slices, size, size, frames, seed)).unwrap();
    let reference = ImageStack::from_real(&mags);
    let mask = embed_sms_mask(&MaskSpec::new(rate, slices, size, size, frames)).unwrap();
    ValidationCase { y_u: measure(&reference, &mask), mask, reference }
}

fn dc_contract() -> Outcome {
    let mut worst = 0.0f64;
    for (seed, rate) in [(1, 2), (2, 4), (3, 1)] {
        let case = phantom_case(2, 16, 6, rate, seed);
        for mode in [SliceMode::SharedPerSlice, SliceMode::Joint3d] {
            let cfg = ReconConfig { mode, ..Default::default() };
            let x = cascade_recon(&case.y_u, &case.mask, &cfg).unwrap();
            let err = measure(&x, &case.mask).max_abs_diff(&case.y_u);
            ensure!(err < 1e-12, "masked entries differ by {err:.2e} ({mode:?}, R={rate})");
            worst = worst.max(err);
        }
    }
    let mut r = rng(1003);
    let s = shape(2, 8, 6, 3);
    let (x, est) = (random_stack(&mut r, s), random_stack(&mut r, s));
    let y = f3d(&x).unwrap();
    let full = data_consistency(&est, &y, &SamplingMask::full(s)).unwrap();
    ensure!(rel_max_err(&full, &x) < 1e-12, "full mask does not return the measured image");
    let empty = SamplingMask::empty(s);
    let kept = data_consistency(&est, &apply_mask(&y, &empty).unwrap(), &empty).unwrap();
    ensure!(kept.max_abs_diff(&est) < 1e-12, "empty mask changes the estimate");
    let u = embed_sms_mask(&MaskSpec::new(2, 2, 8, 6, 3)).unwrap();
    let y_u = apply_mask(&y, &u).unwrap();
    let once = data_consistency(&est, &y_u, &u).unwrap();
    ensure!(data_consistency(&once, &y_u, &u).unwrap().max_abs_diff(&once) < 1e-12, "not idempotent");
    Ok(format!("max masked deviation {worst:.2e}; full, empty and idempotence cases hold"))
}

fn tv_prox() -> Outcome {
    let mut r = rng(1004);
    let mut worst = f64::NEG_INFINITY;
    for case in 0..200 {
        let n = r.random_range(1..=6);
        let w = r.random_range(0.0..=2.0);
        let v: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
        let x = tv_prox_1d(&v, w).unwrap();
        let f = tv_objective(&x, &v, w);
        let oracle = tv_objective(&tv_prox_oracle(&v, w), &v, w);
        ensure!(f <= oracle + 1e-9, "case {case}: {f} > oracle {oracle}");
        worst = worst.max(f - oracle);
        for _ in 0..20 {
            let p: Vec<f64> = x.iter().map(|xi| xi + r.random_range(-1e-3..1e-3)).collect();
            let fp = tv_objective(&p, &v, w);
            ensure!(f <= fp + 1e-9, "case {case}: perturbation lowers the objective {f} -> {fp}");
        }
    }
    Ok(format!("200 sequences, max excess over oracle {worst:.2e}"))
}

fn proxgrad_solver() -> Outcome {
    let mut cases = 0;
    for (seed, rate, lambda, w_t) in
        [(1, 2, 1.0, 0.05), (2, 2, 4.0, 0.2), (3, 4, 0.5, 0.01), (4, 1, 2.0, 1.0), (5, 2, 1.0, 0.5)]
    {
        let case = phantom_case(2, 16, 6, rate, seed);
        let res = prox_gradient_solve(&case.y_u, &case.mask, lambda, w_t, 30).unwrap();
        for (k, pair) in res.objective.windows(2).enumerate() {
            ensure!(pair[1] <= pair[0] * (1.0 + 1e-12), "seed {seed}: objective rises at iteration {k}: {pair:?}");
        }
        cases += 1;
    }
    let mut r = rng(1005);
    let s = shape(2, 8, 8, 4);
    let x = random_stack(&mut r, s);
    let full = SamplingMask::full(s);
    let res = prox_gradient_solve(&measure(&x, &full), &full, 1.0, 0.0, 50).unwrap();
    let err = rel_l2_err(&res.image, &x);
    ensure!(err < 1e-6, "fully sampled relative error {err:.2e} after 50 iterations");
    Ok(format!("{cases} phantom traces non-increasing; fully sampled error {err:.2e}"))
}

struct SuiteSequence {
    cascade: f64,
    independent: f64,
    zero_filled: f64,
}

fn table_ordering() -> Outcome {
    let start = Instant::now();
    let (slices, size, frames) = (2, 32, 12);
    let spec = MaskSpec::new(2, slices, size, size, frames);
    let mut rows = Vec::new();
    for seed in 0..10u64 {
        let mags = gen_phantom(&PhantomSpec::cine(slices, size, size, frames, seed)).unwrap();
        let cfg = SynthConfig { coils: 4, seed, ..Default::default() };
        let out = synthesize_kspace(&mags, &cfg, &spec).unwrap();
        let recon = |mode| {
            let rc =
                ReconConfig { n_iter: 5, denoiser: DenoiserSpec::TvTemporal { w_t: 0.05 }, mode, ..Default::default() };
            rss_combine(&cascade_recon_multicoil(&out.undersampled, &out.mask, &rc).unwrap())
        };
        let zf = out.undersampled.coils().iter().map(|y| zero_filled(y).unwrap()).collect();
        let zf = rss_combine(&smslab::MultiCoilStack::new(zf).unwrap());
        rows.push(SuiteSequence {
            cascade: psnr(&recon(SliceMode::SharedPerSlice), &mags).unwrap(),
            independent: psnr(&recon(SliceMode::IndependentNoDc), &mags).unwrap(),
            zero_filled: psnr(&zf, &mags).unwrap(),
        });
    }
    let elapsed = start.elapsed();
    let n = rows.len() as f64;
    let wins = rows.iter().filter(|s| s.cascade > s.independent).count();
    let gain = rows.iter().map(|s| s.cascade - s.zero_filled).sum::<f64>() / n;
    let col = |f: fn(&SuiteSequence) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let (c, i, z) = (col(|s| s.cascade), col(|s| s.independent), col(|s| s.zero_filled));
    let p_indep = paired_ttest(&c, &i).unwrap().p;
    let p_zf = paired_ttest(&c, &z).unwrap().p;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n;
    let detail = format!(
        "PSNR cascade {:.2} / independent {:.2} / zero-filled {:.2} dB; wins {wins}/10; gain over zero-filled {gain:.2} dB; \
         p(independent) {p_indep:.1e}, p(zero-filled) {p_zf:.1e}",
        mean(&c),
        mean(&i),
        mean(&z)
    );
    let mut failed = Vec::new();
    if wins < 9 {
        failed.push("fewer than 9/10 wins over independent");
    }
    if gain < 3.0 {
        failed.push("mean gain over zero-filled below 3 dB");
    }
    if !(p_indep < 0.05 && p_zf < 0.05) {
        failed.push("paired t-test p >= 0.05");
    }
    if elapsed > Duration::from_secs(120) {
        failed.push("runtime above 2 min");
    }
    if failed.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{}; {detail}", failed.join(", ")))
    }
}

fn phase_statistics() -> Outcome {
    let table = sample_cluster_phases(1000, 100, PI / 3.0, 1007).unwrap();
    let draws: Vec<f64> = table.into_iter().flatten().collect();
    ensure!(draws.len() == 100_000, "{} draws", draws.len());
    let inside = draws.iter().filter(|v| v.abs() <= PI).count() as f64 / draws.len() as f64;
    ensure!((inside - 0.997).abs() <= 0.005, "fraction in [-pi, pi] is {inside}");
    Ok(format!("fraction in [-pi, pi] = {inside:.5}"))
}

fn csm_invariants() -> Outcome {
    let mut worst = 0.0f64;
    for coils in [2, 4, 8] {
        for (a, b) in [(16, 16), (12, 20), (9, 7)] {
            let circ = csm_circular(coils, 2, a, b, 0.6 * a.max(b) as f64, 2.0).unwrap();
            worst = worst.max(circ.max_rss_deviation());
            for seed in 0..5 {
                worst = worst.max(
                    csm_gaussian(coils, 2, a, b, seed, &GaussianCsmRanges::default()).unwrap().max_rss_deviation(),
                );
            }
        }
    }
    ensure!(worst < 1e-6, "RSS deviation {worst:.2e}");
    let csm = csm_circular(2, 1, 17, 17, 12.0, 2.0).unwrap();
    let centre = 8 * 17 + 8;
    let (s0, s1) = (csm.map(0, 0)[centre], csm.map(1, 0)[centre]);
    ensure!(s0 == s1, "opposite coils differ at the centre: {s0} vs {s1}");
    ensure!((s0 - FRAC_1_SQRT_2).abs() <= 2.0 * f64::EPSILON, "centre sensitivity {s0}");
    Ok(format!("max RSS deviation {worst:.2e}; centre sensitivities {s0:.15}"))
}

fn synthesis_roundtrip() -> Outcome {
    let mags = gen_phantom(&PhantomSpec::cine(3, 16, 16, 5, 9)).unwrap();
    let s = mags.shape();
    let mut worst = 0.0f64;
    for csm in [CsmKind::Circular { ring_radius: None }, CsmKind::Gaussian(GaussianCsmRanges::default())] {
        let cfg = SynthConfig { csm, seed: 21, ..Default::default() };
        let out = synthesize_kspace(&mags, &cfg, &MaskSpec::new(2, 3, 16, 16, 5)).unwrap();
        for c in 0..cfg.coils {
            let back = fft2_stack(out.fully_sampled.coil(c), Direction::Inverse).unwrap();
            let expected = ImageStack::new(
                (0..s.slices)
                    .map(|sl| {
                        ComplexVolume::from_fn(s.dims(), Domain::Image, |r, col, t| {
                            Complex::from_polar(mags.get(sl, r, col, t), out.phase.get(c, sl, r, col, t))
                                * out.csm.map(c, sl)[r * s.cols + col]
                        })
                    })
                    .collect(),
            )
            .unwrap();
            worst = worst.max(rel_max_err(&back, &expected));
        }
        ensure!(worst < 1e-10, "roundtrip relative error {worst:.2e}");
        for c in 0..cfg.coils {
            let g = out.phase.grating_component(c);
            ensure!(g == grating_phase(16, 16, c, 21, &cfg.grating).unwrap().as_slice(), "coil {c} grating differs");
            let cluster = out.phase.cluster_component(c);
            for sl in 0..s.slices {
                for p in 0..s.rows * s.cols {
                    for t in 0..s.frames {
                        let i = s.index(sl, p / s.cols, p % s.cols, t);
                        ensure!(
                            out.phase.coil(c)[i] == cluster[i] + g[p],
                            "grating not constant at coil {c} slice {sl} pixel {p} frame {t}"
                        );
                    }
                }
            }
        }
    }
    Ok(format!("max relative error {worst:.2e}; grating identical over frames and slices"))
}

fn bytes_in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

fn library_outputs() -> Vec<Vec<u8>> {
    let mags = gen_phantom(&PhantomSpec::cine(2, 16, 16, 6, 31)).unwrap();
    let fpp = gen_phantom(&PhantomSpec::fpp(2, 16, 16, 12, 31)).unwrap();
    let cfg = SynthConfig { seed: 31, csm: CsmKind::Gaussian(GaussianCsmRanges::default()), ..Default::default() };
    let out = synthesize_kspace(&mags, &cfg, &MaskSpec::new(2, 2, 16, 16, 6)).unwrap();
    let rc = ReconConfig::default();
    let cascade = cascade_recon_multicoil(&out.undersampled, &out.mask, &rc).unwrap();
    let pg = prox_gradient_solve(out.undersampled.coil(0), &out.mask, 1.0, 0.05, 10).unwrap();
    let km = kmeans3d(mags.slice(0), mags.shape().dims(), 6, 31).unwrap();
    let cases = vec![phantom_case(2, 12, 6, 2, 31)];
    let gs = grid_search_weights(&[(1.0, 0.01), (1.0, 0.1), (2.0, 0.05)], &cases, 5, &LossWeights::default()).unwrap();
    vec![
        VolumeFile::from_real(&mags).to_bytes(),
        VolumeFile::from_real(&fpp).to_bytes(),
        VolumeFile::from_multicoil(&out.undersampled).to_bytes(),
        VolumeFile::from_phase(&out.phase).to_bytes(),
        VolumeFile::from_csm(&out.csm).to_bytes(),
        VolumeFile::from_multicoil(&cascade).to_bytes(),
        VolumeFile::from_stack(&pg.image).to_bytes(),
        pg.objective.iter().flat_map(|v| v.to_le_bytes()).collect(),
        km.labels.labels().iter().flat_map(|&l| (l as u64).to_le_bytes()).collect(),
        gs.table.iter().flat_map(|r| r.score.to_le_bytes()).collect(),
    ]
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.insert(p.strip_prefix(dir).unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap());
            }
        }
    }
    files
}

fn cli_outputs(dir: &Path, threads: usize) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let steps: &[&[&str]] = &[
        &["phantom", "--out", "run/ph", "--rows", "16", "--cols", "16", "--frames", "6", "--seed", "5"],
        &["phantom", "--out", "run/fpp", "--mode", "fpp", "--rows", "16", "--cols", "16", "--frames", "10"],
        &["mask", "--rows", "16", "--cols", "16", "--frames", "6", "--out", "run/mask"],
        &["synth", "--input", "run/ph/phantom.cxv", "--seed", "5", "--out", "run/syn"],
        &[
            "recon",
            "--method",
            "zero_filled",
            "--kspace",
            "run/syn/undersampled.cxv",
            "--mask",
            "run/mask/mask.cxv",
            "--reference",
            "run/ph/phantom.cxv",
            "--out",
            "run/zf",
        ],
        &[
            "recon",
            "--method",
            "cascade",
            "--kspace",
            "run/syn/undersampled.cxv",
            "--mask",
            "run/syn/mask.cxv",
            "--reference",
            "run/ph/phantom.cxv",
            "--out",
            "run/cascade",
        ],
        &[
            "recon",
            "--method",
            "proxgrad",
            "--n-outer",
            "10",
            "--kspace",
            "run/syn/undersampled.cxv",
            "--mask",
            "run/syn/mask.cxv",
            "--out",
            "run/pg",
        ],
        &[
            "eval",
            "--reference",
            "run/ph/phantom.cxv,run/ph/phantom.cxv",
            "--recon",
            "run/cascade/recon_rss.cxv,run/pg/recon_rss.cxv",
            "--baseline",
            "run/zf/recon_rss.cxv,run/zf/recon.cxv",
            "--out",
            "run/eval",
        ],
        &["gridsearch", "--reference", "run/ph/phantom.cxv", "--n-outer", "5", "--out", "run/gs"],
    ];
    for args in steps {
        let out = Command::new(env!("CARGO_BIN_EXE_smslab"))
            .current_dir(dir)
            .env("SMSLAB_THREADS", threads.to_string())
            .args(*args)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("{} failed: {}", args[0], String::from_utf8_lossy(&out.stderr)));
        }
    }
    let files = snapshot(&dir.join("run"));
    fs::remove_dir_all(dir.join("run")).map_err(|e| e.to_string())?;
    Ok(files)
}

fn determinism() -> Outcome {
    let reference = bytes_in_pool(1, library_outputs);
    for threads in [1, 4, 4] {
        let again = bytes_in_pool(threads, library_outputs);
        for (k, (a, b)) in reference.iter().zip(&again).enumerate() {
            ensure!(a == b, "library output {k} differs with {threads} threads");
        }
    }
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let base = cli_outputs(tmp.path(), 1)?;
    for threads in [4, 4] {
        let other = cli_outputs(tmp.path(), threads)?;
        ensure!(base.keys().eq(other.keys()), "CLI file sets differ");
        for (name, bytes) in &base {
            ensure!(bytes == &other[name], "{name} differs between SMSLAB_THREADS=1 and {threads}");
        }
    }
    Ok(format!(
        "{} library outputs and {} CLI files byte-identical across runs and 1/4 threads",
        reference.len(),
        base.len()
    ))
}

fn real(s: StackShape, data: Vec<f64>) -> RealStack {
    RealStack::new(s, data).unwrap()
}

fn trace(values: &[f64]) -> ImageStack {
    let d = Dims::new(1, 1, values.len()).unwrap();
    ImageStack::new(vec![ComplexVolume::from_fn(d, Domain::Image, |_, _, t| Complex::new(values[t], 0.0))]).unwrap()
}

fn metric_examples() -> Outcome {
    let mut r = rng(1011);
    let s = StackShape::new(2, 8, 8, 3).unwrap();
    let x = real(s, (0..s.len()).map(|_| r.random_range(0.05..1.0)).collect());
    let scaled = |a: &RealStack, k: f64| real(s, a.data().iter().map(|v| k * v).collect());

    ensure!(nmse(&x, &x).unwrap() == 0.0, "nmse(x, x) != 0");
    ensure!((nmse(&scaled(&x, 2.0), &x).unwrap() - 1.0).abs() < 1e-15, "nmse(2x, x) != 1");
    ensure!(nmse(&RealStack::zeros(s), &x).unwrap() == 1.0, "nmse(0, x) != 1");
    ensure!(nmse(&x, &RealStack::zeros(s)).is_err(), "zero reference accepted");

    ensure!(psnr(&x, &x).unwrap() == f64::INFINITY, "psnr(x, x) not infinite");
    let off = real(s, x.data().iter().map(|v| v + 0.1 * x.max_abs()).collect());
    let p = psnr(&off, &x).unwrap();
    ensure!((p - 20.0).abs() < 1e-12, "psnr at mse = max^2/100 is {p}");
    ensure!((psnr(&scaled(&off, 2.0), &scaled(&x, 2.0)).unwrap() - p).abs() < 1e-12, "psnr not scale invariant");

    ensure!((ssim(&x, &x).unwrap() - 1.0).abs() < 1e-12, "ssim(x, x) != 1");
    let c = StackShape::new(1, 12, 12, 1).unwrap();
    let (m1, m2) = (0.3, 0.8);
    let c1 = (0.01f64 * m2).powi(2);
    let expected = (2.0 * m1 * m2 + c1) / (m1 * m1 + m2 * m2 + c1);
    ensure!(
        (ssim(&real(c, vec![m1; 144]), &real(c, vec![m2; 144])).unwrap() - expected).abs() < 1e-12,
        "constant ssim"
    );
    let img: Vec<f64> = (0..256).map(|i| if (i / 16 + i % 16) % 2 == 0 { 0.8 } else { -0.8 }).collect();
    let neg: Vec<f64> = img.iter().map(|v| -v).collect();
    let anti = ssim_image(&neg, &img, 16, 16, 0.8);
    ensure!(anti < 0.0, "ssim(-x, x) = {anti}");

    ensure!(temporal_tv(&trace(&[0.0, 3.0, 1.0])).unwrap() == 5.0, "temporal tv example");
    ensure!(temporal_tv(&trace(&[2.0, 2.0, 2.0])).unwrap() == 0.0, "static temporal tv");
    let xi = ImageStack::from_real(&x);
    ensure!(loss_eval(&xi, &xi, &LossWeights::new(1.0, 0.5, 0.0).unwrap()).unwrap() == 0.0, "loss of identical inputs");
    let yi = ImageStack::from_real(&off);
    ensure!(
        loss_eval(&yi, &xi, &LossWeights::new(1.0, 0.0, 0.0).unwrap()).unwrap() == mse(&off, &x).unwrap(),
        "mse-only loss"
    );
    ensure!(LossWeights::new(0.0, 0.0, 0.0).is_err(), "all-zero loss weights accepted");

    ensure!(fail_flag(1.001) && !fail_flag(0.0019) && !fail_flag(1.0), "fail flag threshold");

    let t = paired_ttest(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0.0; 5]).unwrap();
    ensure!((t.t - 4.2426).abs() < 1e-4 && (t.p - 0.0132).abs() < 1e-3, "t-test example: t={} p={}", t.t, t.p);
    let same = paired_ttest(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
    ensure!(same.t == 0.0 && same.p == 1.0, "identical samples");
    Ok(format!("closed forms hold; t-test t={:.4} p={:.4}", t.t, t.p))
}

fn main() -> ExitCode {
    let results = [
        run(1, "SMS acquisition equals scaled masked 3D transform", sms_equivalence),
        run(2, "transform suite", transform_suite),
        run(3, "data consistency contract", dc_contract),
        run(4, "TV prox against brute-force oracle", tv_prox),
        run(5, "proximal-gradient solver", proxgrad_solver),
        run(6, "method ordering on the cine suite", table_ordering),
        run(7, "cluster phase statistics", phase_statistics),
        run(8, "coil map invariants", csm_invariants),
        run(9, "synthesis roundtrip", synthesis_roundtrip),
        run(10, "determinism", determinism),
        run(11, "metric examples", metric_examples),
    ];
    let passed = results.iter().filter(|&&ok| ok).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
