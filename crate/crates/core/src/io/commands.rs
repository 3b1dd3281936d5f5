//! The `awtv` subcommands as library functions. Each writes its artifacts
//! into the configured output directory and returns a summary.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{CtError, Result};
use crate::fbp::fbp;
use crate::io::{read_image, write_image, write_sinogram, RasterFile, RasterKind, RunConfig, SweepKind};
use crate::operators::norm2;
use crate::pipelines::{
    noise_stability_sweep, reconstructor_stability_sweep, run_method, Perturbation, PipelineReport,
    SweepPoint, SUMMARY_HEADER,
};
use crate::simulation::{evaluate, MetricsRecord};

pub const METRICS_HEADER: &str = "re,psnr,ssim";

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CtError::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    fs::write(path, text).map_err(|e| CtError::io(path, e))
}

#[derive(Clone, Debug)]
pub struct SimulateSummary {
    /// `||y_noisy - y|| / ||y||`.
    pub noise_ratio: f64,
    pub files: Vec<PathBuf>,
}

/// Writes `gt`, `sinogram_clean`, `sinogram_noisy` and `fbp` rasters.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<SimulateSummary> {
    let exp = cfg.experiment()?;
    let noise = cfg.noise()?;
    let y = exp.measure(&noise)?;
    let clean = exp.clean();
    let diff: Vec<f64> = y.data().iter().zip(clean.data()).map(|(a, b)| a - b).collect();
    let noise_ratio = norm2(&diff) / norm2(clean.data());
    let filter = match &cfg.method {
        Some(m) => m.filter.unwrap_or_default(),
        None => Default::default(),
    };
    let gt = exp.gt();
    let x_fbp = fbp(&y, &filter, gt.width(), gt.height(), gt.pixel_size())?;

    let out = cfg.out_dir();
    let files = vec![out.join("gt"), out.join("sinogram_clean"), out.join("sinogram_noisy"), out.join("fbp")];
    write_image(&files[0], gt, RasterKind::Image)?;
    write_sinogram(&files[1], clean)?;
    write_sinogram(&files[2], &y)?;
    write_image(&files[3], &x_fbp, RasterKind::Image)?;
    Ok(SimulateSummary { noise_ratio, files })
}

/// Runs the configured method and writes `recon`, `weights`, `x_tilde` (when
/// defined) rasters plus `history.csv` and `summary.csv`.
pub fn cmd_reconstruct(cfg: &RunConfig) -> Result<PipelineReport> {
    let method = cfg.method()?;
    let exp = cfg.experiment()?;
    let noise = cfg.noise()?;
    let solver = cfg.solver_config(&exp, method.lambda.expect("resolved methods carry lambda"))?;
    let mut report = run_method(&method, &exp, &noise, &solver)?;

    let out = cfg.out_dir();
    let ps = exp.gt().pixel_size();
    let recon = out.join("recon");
    write_image(&recon, &report.result.image, RasterKind::Image)?;
    let weights = out.join("weights");
    write_image(&weights, &report.result.final_weights.to_image(ps), RasterKind::Weights)?;
    report.artifacts.extend([recon, weights]);
    if let Some(x) = &report.x_tilde {
        let path = out.join("x_tilde");
        write_image(&path, x, RasterKind::Image)?;
        report.artifacts.push(path);
    }
    let history = out.join("history.csv");
    write_text(&history, &report.result.history_csv())?;
    let summary = out.join("summary.csv");
    write_text(&summary, &format!("{SUMMARY_HEADER}\n{}\n", report.summary_row()))?;
    report.artifacts.extend([history, summary]);
    Ok(report)
}

pub fn metrics_csv(m: &MetricsRecord) -> String {
    format!("{METRICS_HEADER}\n{:.8},{:.6},{:.8}\n", m.re, m.psnr, m.ssim)
}

/// Metrics of `x` against `reference`; the CSV is also written to `csv` if given.
pub fn cmd_evaluate(x: &Path, reference: &Path, csv: Option<&Path>) -> Result<MetricsRecord> {
    let x = read_image(x)?;
    let r = read_image(reference)?;
    let m = evaluate(&x, &r)?;
    if let Some(path) = csv {
        write_text(path, &metrics_csv(&m))?;
    }
    Ok(m)
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut s = String::from("level,distance\n");
    for p in points {
        s.push_str(&format!("{},{:.10e}\n", p.level, p.distance));
    }
    s
}

/// Runs the configured sweep and writes `stability.csv`.
pub fn cmd_stability(cfg: &RunConfig) -> Result<(Vec<SweepPoint>, PathBuf)> {
    let st = cfg
        .stability
        .as_ref()
        .ok_or_else(|| CtError::config("configuration has no [stability] section"))?;
    let method = cfg.method()?;
    let exp = cfg.experiment()?;
    let noise = cfg.noise()?;
    let solver = cfg.solver_config(&exp, method.lambda.expect("resolved methods carry lambda"))?;
    let pseed = st.perturbation_seed.unwrap_or(cfg.seed);
    let points = match st.sweep {
        SweepKind::Noise => noise_stability_sweep(&exp, &method, &st.levels, noise.seed, &solver)?.points,
        SweepKind::ReconstructorImage | SweepKind::ReconstructorGradient => {
            let kind = if st.sweep == SweepKind::ReconstructorImage {
                Perturbation::Image
            } else {
                Perturbation::Gradient
            };
            reconstructor_stability_sweep(
                &exp,
                &noise,
                method.eta_value()?,
                method.p_value()?,
                &st.levels,
                kind,
                pseed,
                &solver,
            )?
            .points
        }
    };
    let path = cfg.out_dir().join("stability.csv");
    write_text(&path, &sweep_csv(&points))?;
    Ok((points, path))
}

/// Min-max scaling of finite values to 8 bits; NaN maps to 0 and infinities
/// to the ends of the range. A constant image renders as mid-gray.
pub fn to_gray8(data: &[f32]) -> Vec<u8> {
    let finite = data.iter().filter(|v| v.is_finite()).map(|&v| v as f64);
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let span = hi - lo;
    data.iter()
        .map(|&v| {
            if v.is_nan() {
                return 0;
            }
            if !(span > 0.0) {
                return 128;
            }
            let t = ((v as f64 - lo) / span).clamp(0.0, 1.0);
            (t * 255.0).round() as u8
        })
        .collect()
}

pub fn write_png(path: &Path, width: usize, height: usize, gray: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    let file = fs::File::create(path).map_err(|e| CtError::io(path, e))?;
    let mut enc = png::Encoder::new(std::io::BufWriter::new(file), width as u32, height as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let encode_err = |e: png::EncodingError| CtError::io(path, std::io::Error::other(e));
    let mut writer = enc.write_header().map_err(encode_err)?;
    writer.write_image_data(gray).map_err(encode_err)?;
    writer.finish().map_err(encode_err)
}

/// `iteration,re` rows from a solver history CSV.
pub fn re_curve(history_csv: &str) -> Result<String> {
    let mut lines = history_csv.lines();
    let header = lines.next().unwrap_or_default();
    let cols: Vec<&str> = header.split(',').collect();
    let find = |name: &str| {
        cols.iter()
            .position(|c| c.trim() == name)
            .ok_or_else(|| CtError::config(format!("history has no `{name}` column")))
    };
    let (it, re) = (find("iteration")?, find("re")?);
    let mut out = String::from("iteration,re\n");
    for line in lines.filter(|l| !l.is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        match (f.get(it), f.get(re)) {
            (Some(i), Some(r)) if !r.is_empty() => out.push_str(&format!("{i},{r}\n")),
            (Some(_), Some(_)) => {}
            _ => return Err(CtError::config(format!("malformed history row {line:?}"))),
        }
    }
    Ok(out)
}

/// Renders a raster to `png` (default `<stem>.png`). With `history`, also
/// writes its RE-vs-iteration curve next to it as `<history stem>_re.csv`.
pub fn cmd_render(raster: &Path, png: Option<&Path>, history: Option<&Path>) -> Result<Vec<PathBuf>> {
    let r = RasterFile::read(raster)?;
    let png_path = match png {
        Some(p) => p.to_path_buf(),
        None => crate::io::raster_paths(raster).0.with_extension("png"),
    };
    write_png(&png_path, r.header.width, r.header.height, &to_gray8(&r.data))?;
    let mut files = vec![png_path];
    if let Some(h) = history {
        let text = fs::read_to_string(h).map_err(|e| CtError::io(h, e))?;
        let stem = h.with_extension("");
        let mut name = stem.into_os_string();
        name.push("_re.csv");
        let path = PathBuf::from(name);
        write_text(&path, &re_curve(&text)?)?;
        files.push(path);
    }
    Ok(files)
}
