use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use smslab::io::{self, Kind, VolumeFile};
use smslab::metrics::{paired_ttest, LossWeights, MetricReport};
use smslab::phantom::{gen_phantom, CineParams, FppParams, PhantomKind, PhantomSpec};
use smslab::recon::{
    cascade_recon_multicoil, grid_search_weights, prox_gradient_solve, zero_filled, DenoiserSpec, ReconConfig,
    SliceMode, ValidationCase,
};
use smslab::sampling::{apply_mask, embed_sms_mask, MaskSpec, SamplingMask};
use smslab::synth::{compose_kspace, synthesize_phase, CsmKind, GaussianCsmRanges, GratingRanges, SynthConfig};
use smslab::transforms::{f3d, rss_combine};
use smslab::{Domain, ImageStack, KSpaceVolume, MultiCoilStack, RealStack, StackShape};

use crate::config::{CliError, CliResult, Resolved};
use crate::png;

pub fn run(r: &Resolved) -> CliResult<()> {
    match r.subcommand.as_str() {
        "phantom" => phantom(r),
        "mask" => mask(r),
        "synth" => synth(r),
        "recon" => recon(r),
        "eval" => eval(r),
        "gridsearch" => gridsearch(r),
        other => Err(CliError::Config(format!("unknown subcommand {other}"))),
    }
}

/// Creates the output directory and echoes the resolved config into it.
fn prepare_out(r: &Resolved) -> CliResult<PathBuf> {
    let out = PathBuf::from(r.string("out")?);
    fs::create_dir_all(&out)
        .map_err(|e| CliError::Runtime(format!("cannot create output directory {}: {e}", out.display())))?;
    write_text(&out.join("config.txt"), &io::format_metadata(&r.entries()))?;
    Ok(out)
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn write_volume(path: &Path, v: &VolumeFile, r: &Resolved, extra: &[(&str, String)]) -> CliResult<()> {
    let wrap = |e: smslab::Error| CliError::Runtime(format!("cannot write {}: {e}", path.display()));
    io::write_volume(path, v).map_err(wrap)?;
    let mut meta = r.entries();
    meta.insert("dims".into(), v.dims.iter().map(u32::to_string).collect::<Vec<_>>().join(" "));
    for (k, val) in extra {
        meta.insert(k.to_string(), val.clone());
    }
    io::write_sidecar(path, &meta).map_err(wrap)
}

fn read_volume(path: &Path) -> CliResult<VolumeFile> {
    io::read_volume(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// Records the seed of the first input that carries one.
fn inherit_seed(r: &Resolved, input: &Path) -> Resolved {
    let seed = io::read_sidecar(input).ok().and_then(|m| m.get("seed").cloned());
    r.with_default("seed", seed)
}

fn with_path<T>(path: &Path, res: smslab::Result<T>) -> CliResult<T> {
    res.map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// Real volumes as stored, complex coil images combined by RSS.
fn read_magnitude(path: &Path) -> CliResult<RealStack> {
    let v = read_volume(path)?;
    match v.kind() {
        Kind::Real32 => with_path(path, v.to_real()),
        Kind::Complex64 => Ok(rss_combine(&with_path(path, v.to_multicoil::<ImageStack>(Domain::Image))?)),
        Kind::Mask => Err(CliError::Runtime(format!("{}: expected an image volume, found a mask", path.display()))),
    }
}

fn phantom(r: &Resolved) -> CliResult<()> {
    let mode = r.choice("mode", &["cine", "fpp"])?;
    let kind = if mode == "cine" {
        PhantomKind::Cine(CineParams { motion_amplitude: r.f64("motion_amplitude")?, period: r.usize("period")? })
    } else {
        let mut p = FppParams::default();
        if let Some(d) = r.opt_f64("myo_delay")? {
            p = p.with_myocardial_delay(d);
        }
        PhantomKind::Fpp(p)
    };
    let spec = PhantomSpec {
        kind,
        slices: r.usize("slices")?,
        rows: r.usize("rows")?,
        cols: r.usize("cols")?,
        frames: r.usize("frames")?,
        seed: r.u64("seed")?,
    };
    spec.validate()?;
    let x = gen_phantom(&spec)?;
    let out = prepare_out(r)?;
    write_volume(&out.join("phantom.cxv"), &VolumeFile::from_real(&x), r, &[])?;
    println!("wrote phantom {} to {}", x.shape(), out.display());
    Ok(())
}

fn mask_spec(r: &Resolved, sms: usize, rows: usize, cols: usize, frames: usize) -> CliResult<MaskSpec> {
    let spec = MaskSpec {
        r_inplane: r.usize("r_inplane")?,
        sms,
        frames,
        rows,
        cols,
        interleave_step: r.usize("interleave_step")?,
        acs_rows: r.usize("acs_rows")?,
    };
    spec.validate()?;
    Ok(spec)
}

/// The helical mask or a fully sampled one, with its nominal acceleration.
fn build_mask(r: &Resolved, shape: StackShape) -> CliResult<(SamplingMask, usize)> {
    let pattern = r.choice("pattern", &["helical", "full"])?;
    let spec = mask_spec(r, shape.slices, shape.rows, shape.cols, shape.frames)?;
    if pattern == "full" {
        Ok((SamplingMask::full(shape), 1))
    } else {
        Ok((embed_sms_mask(&spec)?, spec.total_acceleration()))
    }
}

fn mask(r: &Resolved) -> CliResult<()> {
    let shape = StackShape::new(r.usize("sms")?, r.usize("rows")?, r.usize("cols")?, r.usize("frames")?)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let (u, accel) = build_mask(r, shape)?;
    let out = prepare_out(r)?;
    let extra =
        [("total_acceleration", accel.to_string()), ("acquired_fraction", format!("{:.6}", u.acquired_fraction()))];
    write_volume(&out.join("mask.cxv"), &VolumeFile::from_mask(&u), r, &extra)?;
    println!("total_acceleration = {accel}");
    Ok(())
}

fn synth(r: &Resolved) -> CliResult<()> {
    let csm = match r.choice("csm", &["circular", "gaussian"])?.as_str() {
        "circular" => CsmKind::Circular { ring_radius: r.opt_f64("ring_radius")? },
        _ => CsmKind::Gaussian(GaussianCsmRanges::default()),
    };
    let cfg = SynthConfig {
        k_clusters: r.usize("k_clusters")?,
        sigma_phase: r.f64("sigma_phase")?,
        coils: r.usize("coils")?,
        grating: GratingRanges { amplitude: r.range("grating_amplitude")?, frequency: r.range("grating_frequency")? },
        csm,
        d_min: r.f64("d_min")?,
        seed: r.u64("seed")?,
    };
    cfg.validate()?;
    let input = r.input("input")?;
    let magnitudes = read_magnitude(&input)?;
    let shape = magnitudes.shape();
    let (u, accel) = build_mask(r, shape)?;

    let (_, phase) = synthesize_phase(&magnitudes, &cfg)?;
    let maps = cfg.make_csm(shape.slices, shape.rows, shape.cols)?;
    let (under, full, images) = compose_kspace(&magnitudes, &phase, &maps, &u)?;

    let out = prepare_out(r)?;
    let accel = [("total_acceleration", accel.to_string())];
    write_volume(&out.join("undersampled.cxv"), &VolumeFile::from_multicoil(&under), r, &accel)?;
    write_volume(&out.join("fully_sampled.cxv"), &VolumeFile::from_multicoil(&full), r, &[])?;
    write_volume(&out.join("coil_images.cxv"), &VolumeFile::from_multicoil(&images), r, &[])?;
    write_volume(&out.join("phase.cxv"), &VolumeFile::from_phase(&phase), r, &[])?;
    write_volume(&out.join("csm.cxv"), &VolumeFile::from_csm(&maps), r, &[])?;
    write_volume(&out.join("mask.cxv"), &VolumeFile::from_mask(&u), r, &accel)?;
    write_volume(&out.join("reference.cxv"), &VolumeFile::from_real(&magnitudes), r, &[])?;
    println!("synthesized {} coils of {shape} into {}", cfg.coils, out.display());
    Ok(())
}

enum Method {
    ZeroFilled,
    Cascade(ReconConfig),
    ProxGrad { lambda: f64, w_t: f64, n_outer: usize },
}

fn recon_method(r: &Resolved) -> CliResult<Method> {
    let method = r.choice("method", &["zero_filled", "cascade", "proxgrad"])?;
    let n_iter = r.usize("n_iter")?;
    let lambda = r.f64("lambda")?;
    let step = r.f64("step")?;
    let w_s = r.f64("w_s")?;
    let w_t = r.f64("w_t")?;
    let n_outer = r.usize("n_outer")?;
    let denoiser = match r.choice("denoiser", &["identity", "tv_temporal", "tv_spatiotemporal"])?.as_str() {
        "identity" => DenoiserSpec::Identity,
        "tv_temporal" => DenoiserSpec::TvTemporal { w_t },
        _ => DenoiserSpec::TvSpatiotemporal { w_s, w_t },
    };
    let mode = match r.choice("mode", &["shared_per_slice", "joint_3d", "independent_no_dc"])?.as_str() {
        "shared_per_slice" => SliceMode::SharedPerSlice,
        "joint_3d" => SliceMode::Joint3d,
        _ => SliceMode::IndependentNoDc,
    };
    Ok(match method.as_str() {
        "zero_filled" => Method::ZeroFilled,
        "cascade" => {
            let cfg = ReconConfig { n_iter, lambda, step, denoiser, mode };
            cfg.validate()?;
            Method::Cascade(cfg)
        }
        _ => {
            if !(lambda > 0.0) || w_t < 0.0 {
                return Err(CliError::Config(format!("proxgrad needs lambda > 0 and w_t >= 0, got {lambda}, {w_t}")));
            }
            Method::ProxGrad { lambda, w_t, n_outer }
        }
    })
}

fn recon(r: &Resolved) -> CliResult<()> {
    let r = &inherit_seed(r, Path::new(&r.string("kspace")?));
    let method = recon_method(r)?;
    let png_dump = r.bool("png")?;
    let error_scale = r.f64("error_scale")?;
    if !(error_scale > 0.0) {
        return Err(CliError::Config(format!("invalid value for error_scale: must be > 0, got {error_scale}")));
    }
    let kspace_path = r.input("kspace")?;
    let mask_path = r.input("mask")?;
    let reference_path = if r.is_set("reference") { Some(r.input("reference")?) } else { None };

    let y: MultiCoilStack<KSpaceVolume> =
        with_path(&kspace_path, read_volume(&kspace_path)?.to_multicoil(Domain::KSpace))?;
    let u = with_path(&mask_path, read_volume(&mask_path)?.to_mask())?;
    if u.shape() != y.shape() {
        return Err(CliError::Runtime(format!("mask shape {} does not match k-space shape {}", u.shape(), y.shape())));
    }
    let reference = reference_path.as_deref().map(read_magnitude).transpose()?;
    if let Some(x_ref) = &reference {
        if x_ref.shape() != y.shape() {
            return Err(CliError::Runtime(format!(
                "reference shape {} does not match k-space shape {}",
                x_ref.shape(),
                y.shape()
            )));
        }
    }

    let mut traces = None;
    let images = match &method {
        Method::ZeroFilled => MultiCoilStack::new(y.coils().par_iter().map(zero_filled).collect::<Result<_, _>>()?)?,
        Method::Cascade(cfg) => cascade_recon_multicoil(&y, &u, cfg)?,
        Method::ProxGrad { lambda, w_t, n_outer } => {
            let results = y
                .coils()
                .par_iter()
                .map(|yc| prox_gradient_solve(yc, &u, *lambda, *w_t, *n_outer))
                .collect::<Result<Vec<_>, _>>()?;
            traces = Some(results.iter().map(|res| res.objective.clone()).collect::<Vec<_>>());
            MultiCoilStack::new(results.into_iter().map(|res| res.image).collect())?
        }
    };
    let rss = rss_combine(&images);

    let out = prepare_out(r)?;
    write_volume(&out.join("recon.cxv"), &VolumeFile::from_multicoil(&images), r, &[])?;
    write_volume(&out.join("recon_rss.cxv"), &VolumeFile::from_real(&rss), r, &[])?;
    if let Some(traces) = traces {
        let mut csv = String::from("iteration");
        for c in 0..traces.len() {
            csv += &format!(",coil{c}");
        }
        csv.push('\n');
        for it in 0..traces[0].len() {
            csv += &it.to_string();
            for t in &traces {
                csv += &format!(",{:.12e}", t[it]);
            }
            csv.push('\n');
        }
        write_text(&out.join("objective.csv"), &csv)?;
    }
    if png_dump {
        let dir = out.join("png");
        fs::create_dir_all(&dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
        let window = reference.as_ref().unwrap_or(&rss).max_abs();
        png::write_frames(&dir, "recon", &rss, window)?;
        if let Some(x_ref) = &reference {
            png::write_frames(&dir, "reference", x_ref, window)?;
            png::write_error_maps(&dir, &rss, x_ref, window, error_scale)?;
        }
    }
    println!("reconstructed {} coils of {} into {}", images.num_coils(), images.shape(), out.display());
    Ok(())
}

fn ids_for(r: &Resolved, n: usize) -> CliResult<Vec<String>> {
    if !r.is_set("ids") {
        return Ok((0..n).map(|i| format!("seq{i:03}")).collect());
    }
    let ids = r.list("ids")?;
    if ids.len() != n {
        return Err(CliError::Config(format!("ids lists {} entries for {n} sequences", ids.len())));
    }
    Ok(ids)
}

fn report_for(ids: &[String], recons: &[PathBuf], refs: &[RealStack]) -> CliResult<MetricReport> {
    let mut report = MetricReport::default();
    for ((id, path), x_ref) in ids.iter().zip(recons).zip(refs) {
        let x = read_magnitude(path)?;
        with_path(path, report.push_sequence(id.clone(), &x, x_ref))?;
    }
    Ok(report)
}

fn write_report(path: &Path, report: &MetricReport) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    with_path(path, report.write_csv(BufWriter::new(file)))
}

fn eval(r: &Resolved) -> CliResult<()> {
    let r = &inherit_seed(r, Path::new(&r.list("reference")?[0]));
    let label = r.string("label")?;
    let baseline_label = r.string("baseline_label")?;
    let n = r.list("reference")?.len();
    let ids = ids_for(r, n)?;
    for key in ["recon", "baseline"] {
        if r.is_set(key) && r.list(key)?.len() != n {
            return Err(CliError::Config(format!("{key} lists {} files for {n} references", r.list(key)?.len())));
        }
    }
    let ref_paths = r.inputs("reference")?;
    let recon_paths = r.inputs("recon")?;
    let baseline_paths = if r.is_set("baseline") { Some(r.inputs("baseline")?) } else { None };

    let refs = ref_paths.iter().map(|p| read_magnitude(p)).collect::<CliResult<Vec<_>>>()?;
    let report = report_for(&ids, &recon_paths, &refs)?;
    let baseline = baseline_paths.map(|p| report_for(&ids, &p, &refs)).transpose()?;

    let out = prepare_out(r)?;
    write_report(&out.join("metrics.csv"), &report)?;
    let mut summary = report.summary_text(&label);
    if let Some(b) = &baseline {
        write_report(&out.join("baseline_metrics.csv"), b)?;
        summary += &b.summary_text(&baseline_label);
        let wins = report.psnr_values().iter().zip(b.psnr_values()).filter(|(a, b)| **a > *b).count();
        summary += &format!("{label}.psnr_wins = {wins}/{n}\n");
        let pairs: [(&str, Vec<f64>, Vec<f64>); 3] = [
            ("nmse", report.nmse_values(), b.nmse_values()),
            ("psnr_db", report.psnr_values(), b.psnr_values()),
            ("ssim", report.ssim_values(), b.ssim_values()),
        ];
        if n < 2 {
            summary += "ttest = skipped, needs at least two sequences\n";
        } else {
            for (name, a, c) in pairs {
                let t = paired_ttest(&a, &c)?;
                summary += &format!("ttest.{name}.t = {:.6}\nttest.{name}.p = {:.6e}\n", t.t, t.p);
            }
        }
    }
    write_text(&out.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn gridsearch(r: &Resolved) -> CliResult<()> {
    let r = &inherit_seed(r, Path::new(&r.list("reference")?[0]));
    let lambdas = r.f64_list("lambdas")?;
    let w_ts = r.f64_list("w_ts")?;
    let n_outer = r.usize("n_outer")?;
    let weights = LossWeights::new(r.f64("w_mse")?, r.f64("w_ssim")?, r.f64("w_tv")?)?;
    let candidates: Vec<(f64, f64)> = lambdas.iter().flat_map(|&l| w_ts.iter().map(move |&w| (l, w))).collect();

    let mut cases = Vec::new();
    for path in r.inputs("reference")? {
        let x = read_magnitude(&path)?;
        let s = x.shape();
        let spec = mask_spec(r, s.slices, s.rows, s.cols, s.frames)?;
        let mask = embed_sms_mask(&spec)?;
        let reference = ImageStack::from_real(&x);
        let y_u = apply_mask(&f3d(&reference)?, &mask)?;
        cases.push(ValidationCase { y_u, mask, reference });
    }
    let result = grid_search_weights(&candidates, &cases, n_outer, &weights)?;

    let out = prepare_out(r)?;
    let mut csv = String::from("lambda,w_t,score\n");
    for row in &result.table {
        csv += &format!("{},{},{:.9}\n", row.lambda, row.w_t, row.score);
    }
    write_text(&out.join("gridsearch.csv"), &csv)?;
    let best = result.best();
    let mut meta = BTreeMap::new();
    meta.insert("best.lambda".to_string(), best.lambda.to_string());
    meta.insert("best.w_t".to_string(), best.w_t.to_string());
    meta.insert("best.score".to_string(), format!("{:.9}", best.score));
    let text = io::format_metadata(&meta);
    write_text(&out.join("best.txt"), &text)?;
    print!("{text}");
    Ok(())
}
