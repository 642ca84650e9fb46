//! `illumkit` — command-line pipeline over the core library: sample locales,
//! render ground-truth illumination, warp observations, complete panoramas,
//! convert LDR/HDR, convolve, relight, and evaluate.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use serde_json::json;

use illumkit_core::completion::{complete_mirror, complete_nn, PanoLibrary};
use illumkit_core::hdr;
use illumkit_core::ibr::{build_distance_map, render_illumination, sample_locales, LocaleSamplingParams};
use illumkit_core::io::manifest::{load_library, load_scene, save_locales};
use illumkit_core::io::pfm;
use illumkit_core::metrics::{
    eval_illum, grad_check, warp_jacobian_fd_check, DiffuseLossField, L2LogField,
    NormalsCosineField, QuadraticField, ScalarField,
};
use illumkit_core::shading::{default_work_height, diffuse_convolve, relight_sphere, Material};
use illumkit_core::warp::{forward_warp, WarpRequest, WarpTarget};
use illumkit_core::{GeometryMap, Locale, PanoKind, PanoramaImage};

#[derive(Parser)]
#[command(name = "illumkit", version, about = "Locale-centered illumination map toolkit")]
struct Cli {
    /// Print a machine-readable JSON summary on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum CompleteMethod {
    Nn,
    Mirror,
}

#[derive(Clone, Copy, ValueEnum)]
enum SphereMaterial {
    Mirror,
    Diffuse,
}

fn parse_pixel(s: &str) -> Result<(usize, usize), String> {
    let (x, y) = s
        .split_once(',')
        .ok_or_else(|| format!("expected X,Y, got {s:?}"))?;
    Ok((
        x.trim().parse().map_err(|e| format!("bad X {x:?}: {e}"))?,
        y.trim().parse().map_err(|e| format!("bad Y {y:?}: {e}"))?,
    ))
}

#[derive(Subcommand)]
enum Command {
    /// Sample upright, supported, clear locales from a scene's point set.
    GenLocales {
        manifest: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Render ground-truth illumination at a sampled locale (two-step IBR).
    GenIllum {
        manifest: PathBuf,
        /// Index into the sampled locale list.
        #[arg(long)]
        locale: usize,
        #[arg(short, long)]
        output: PathBuf,
        /// Panorama height in pixels (width is twice this).
        #[arg(long, default_value_t = 160)]
        height: usize,
    },
    /// Forward-warp one observation to the locale above a selected pixel.
    Warp {
        manifest: PathBuf,
        /// Observation index in the manifest.
        #[arg(long)]
        image: usize,
        /// Selected pixel as X,Y.
        #[arg(long, value_parser = parse_pixel)]
        pixel: (usize, usize),
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 160)]
        height: usize,
    },
    /// Fill the unobserved region of a warped panorama.
    Complete {
        partial: PathBuf,
        #[arg(long, value_enum)]
        method: CompleteMethod,
        /// Directory of complete panoramas (required for nn).
        #[arg(long)]
        library: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Decode LDR values to HDR radiance through the intensity curve.
    #[command(name = "ldr2hdr")]
    Ldr2Hdr {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Encode HDR radiance to LDR values (saturating above the curve range).
    #[command(name = "hdr2ldr")]
    Hdr2Ldr {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Cosine-weighted diffuse convolution of an HDR panorama.
    Diffuse {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Rows of the working resolution (must divide the input height).
        #[arg(long)]
        work_height: Option<usize>,
    },
    /// Render a sphere lit by the panorama (PNG preview).
    Relight {
        input: PathBuf,
        #[arg(long, value_enum)]
        material: SphereMaterial,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 256)]
        size: usize,
        /// Fixed exposure; defaults to auto (99th-percentile scaling).
        #[arg(long)]
        exposure: Option<f64>,
    },
    /// Compare a predicted illumination map against ground truth.
    Eval {
        pred: PathBuf,
        gt: PathBuf,
        /// Search column rotations for the best alignment first.
        #[arg(long)]
        align: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check analytic gradients of the losses against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() {
    if let Ok(v) = std::env::var("ILLUMKIT_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
    }
    let cli = Cli::parse();
    match run(&cli) {
        Ok((value, text)) => {
            let line = if cli.json {
                serde_json::to_string_pretty(&value).expect("serializable")
            } else {
                text
            };
            use std::io::Write;
            // A closed pipe downstream (e.g. `| head`) is not an error.
            let _ = writeln!(std::io::stdout(), "{line}");
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<(serde_json::Value, String)> {
    match &cli.command {
        Command::GenLocales { manifest, output } => {
            let scene = load_scene(manifest)?;
            let points = scene
                .points
                .ok_or_else(|| anyhow!("manifest {manifest:?} lists no labeled point set"))?;
            let locales = sample_locales(&points, &LocaleSamplingParams::default())?;
            save_locales(output, &locales)?;
            Ok((
                json!({"locales": locales.len(), "output": output}),
                format!("accepted {} locales -> {}", locales.len(), output.display()),
            ))
        }
        Command::GenIllum { manifest, locale, output, height } => {
            let scene = load_scene(manifest)?;
            let points = scene
                .points
                .ok_or_else(|| anyhow!("manifest {manifest:?} lists no labeled point set"))?;
            let locales = sample_locales(&points, &LocaleSamplingParams::default())?;
            let frame = locales
                .get(*locale)
                .ok_or_else(|| anyhow!("locale {locale} out of range ({} sampled)", locales.len()))?;
            let distance = build_distance_map(&scene.observations, frame, *height)?;
            let illum = render_illumination(&scene.observations, frame, &distance)?;
            pfm::write_panorama(output, &illum)?;
            let holes = count_unobserved(&illum);
            Ok((
                json!({"locale": locale, "height": height, "unobserved": holes, "output": output}),
                format!(
                    "rendered {}x{} illumination at locale {} ({} unfilled pixels) -> {}",
                    illum.width(),
                    illum.height(),
                    locale,
                    holes,
                    output.display()
                ),
            ))
        }
        Command::Warp { manifest, image, pixel, output, height } => {
            let scene = load_scene(manifest)?;
            let obs = scene
                .observations
                .get(*image)
                .ok_or_else(|| anyhow!("image {image} out of range ({} in manifest)", scene.observations.len()))?;
            let geometry = GeometryMap::from_depth(&obs.depth, &obs.camera)?;
            let warped = forward_warp(&WarpRequest {
                image: &scene.ldr[*image],
                geometry: &geometry,
                camera: &obs.camera,
                target: WarpTarget::SelectedPixel { x: pixel.0, y: pixel.1 },
                kind: PanoKind::LdrColor,
                pano_height: *height,
            })?;
            pfm::write_panorama(output, &warped.color)?;
            let total = warped.color.width() * warped.color.height();
            let covered = total - count_unobserved(&warped.color);
            Ok((
                json!({"image": image, "pixel": [pixel.0, pixel.1], "covered": covered, "total": total, "output": output}),
                format!("warped image {} at pixel ({},{}): {covered}/{total} directions covered -> {}",
                    image, pixel.0, pixel.1, output.display()),
            ))
        }
        Command::Complete { partial, method, library, output } => {
            let input = pfm::read_panorama(partial)?;
            match method {
                CompleteMethod::Nn => {
                    let dir = library
                        .as_ref()
                        .ok_or_else(|| anyhow!("--method nn requires --library <dir>"))?;
                    let entries = load_library(dir)?;
                    let lib = PanoLibrary::new(entries)?;
                    let (filled, m) = complete_nn(&input, &lib)?;
                    pfm::write_panorama(output, &filled)?;
                    Ok((
                        json!({"method": "nn", "id": m.id, "rotation": m.rotation, "score": m.score, "output": output}),
                        format!(
                            "filled from '{}' rotated {} columns (score {:.6e}) -> {}",
                            m.id,
                            m.rotation,
                            m.score,
                            output.display()
                        ),
                    ))
                }
                CompleteMethod::Mirror => {
                    let filled = complete_mirror(&input)?;
                    pfm::write_panorama(output, &filled)?;
                    Ok((
                        json!({"method": "mirror", "output": output}),
                        format!("mirror-filled -> {}", output.display()),
                    ))
                }
            }
        }
        Command::Ldr2Hdr { input, output } => {
            let ldr = pfm::read_panorama(input)?;
            let (hdr_map, flagged) = hdr::ldr_to_hdr(&ldr)?;
            pfm::write_panorama(output, &hdr_map)?;
            Ok((
                json!({"flagged": flagged, "output": output}),
                format!("decoded to radiance ({flagged} values clamped) -> {}", output.display()),
            ))
        }
        Command::Hdr2Ldr { input, output } => {
            let h = pfm::read_panorama(input)?;
            let (ldr, flagged) = hdr::hdr_to_ldr(&h)?;
            pfm::write_panorama(output, &ldr)?;
            Ok((
                json!({"flagged": flagged, "output": output}),
                format!("encoded to LDR ({flagged} values saturated) -> {}", output.display()),
            ))
        }
        Command::Diffuse { input, output, work_height } => {
            let h = pfm::read_panorama(input)?;
            let wh = work_height.unwrap_or_else(|| default_work_height(&h));
            let d = diffuse_convolve(&h, wh)?;
            pfm::write_panorama(output, &d)?;
            Ok((
                json!({"work_height": wh, "output": output}),
                format!("diffuse-convolved at {}x{} -> {}", 2 * wh, wh, output.display()),
            ))
        }
        Command::Relight { input, material, output, size, exposure } => {
            let h = pfm::read_panorama(input)?;
            let exp = exposure.unwrap_or_else(|| hdr::auto_exposure(&h));
            let mat = match material {
                SphereMaterial::Mirror => Material::Mirror,
                SphereMaterial::Diffuse => Material::Diffuse,
            };
            let sphere = relight_sphere(&h, mat, *size, exp)?;
            pfm::write_rgba_png(output, &sphere)?;
            Ok((
                json!({"size": size, "exposure": exp, "output": output}),
                format!("rendered {size}x{size} sphere at exposure {exp:.4} -> {}", output.display()),
            ))
        }
        Command::Eval { pred, gt, align, output } => {
            let p = pfm::read_panorama(pred)?;
            let g = pfm::read_panorama(gt)?;
            let report = eval_illum(&p, &g, *align)?;
            if let Some(path) = output {
                pfm::write_json(path, &report)?;
            }
            let value = serde_json::to_value(&report)?;
            let text = format!(
                "l2_log {:.6}  l2 {:.6}  diffuse {:.6}  ({} px compared, {} skipped, offset {})",
                report.l2_log,
                report.l2,
                report.diffuse,
                report.pixels_compared,
                report.pixels_skipped,
                report.rotation_offset
            );
            Ok((value, text))
        }
        Command::Gradcheck { seed } => gradcheck_suite(*seed),
    }
}

fn count_unobserved(p: &PanoramaImage) -> usize {
    (0..p.height())
        .flat_map(|v| (0..p.width()).map(move |u| (u, v)))
        .filter(|&(u, v)| !p.is_observed(u, v))
        .count()
}

/// Runs the gradient checks the library promises: quadratic sanity anchor,
/// the log/diffuse/normal losses, and the warp Jacobian, all against central
/// finite differences at h = 1e-5.
fn gradcheck_suite(seed: u64) -> anyhow::Result<(serde_json::Value, String)> {
    const H: f64 = 1e-5;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut results: Vec<(String, f64, f64)> = Vec::new();

    // Keep Σx² small: the finite-difference noise floor is ulp(f)/2h, so a
    // large sum would eat the 1e-8 sanity tolerance.
    let quad = QuadraticField { dim: 64 };
    let x: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
    results.push(("quadratic".into(), grad_check(&quad, &x, H, seed)?, 1e-8));

    let gt: Vec<f64> = (0..1024).map(|_| rng.gen_range(0.1..2.0)).collect();
    let x: Vec<f64> = (0..1024).map(|_| rng.gen_range(0.1..2.0)).collect();
    results.push((
        "loss_l2_log".into(),
        grad_check(&L2LogField::new(gt)?, &x, H, seed)?,
        1e-4,
    ));

    let mut gt_pano = PanoramaImage::new(20, 1, PanoKind::HdrRadiance, Locale::canonical(), 0.0)?;
    for v in gt_pano.data_mut() {
        *v = rng.gen_range(0.1..2.0);
    }
    let field = DiffuseLossField::new(&gt_pano, 10)?;
    let x: Vec<f64> = (0..field.dim()).map(|_| rng.gen_range(0.1..2.0)).collect();
    results.push(("loss_diffuse".into(), grad_check(&field, &x, H, seed)?, 1e-4));

    let gt: Vec<Vector3<f64>> = (0..256)
        .map(|_| {
            Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            )
            .normalize()
        })
        .collect();
    let x: Vec<f64> = (0..768)
        .map(|_| {
            let v: f64 = rng.gen_range(-1.0..1.0);
            // Push entries away from zero so no normal collapses.
            v + 0.8 * v.signum()
        })
        .collect();
    results.push((
        "loss_normals_cosine".into(),
        grad_check(&NormalsCosineField::new(gt)?, &x, H, seed)?,
        1e-4,
    ));

    let locale = Locale::with_default_azimuth(Vector3::new(0.3, -0.2, 1.1), Vector3::z())
        .context("locale for the Jacobian check")?;
    let points: Vec<Vector3<f64>> = std::iter::repeat_with(|| {
        Vector3::new(
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
        )
    })
    .filter(|p| {
        let d = p - locale.position;
        d.norm() > 0.5 && d.xy().norm() > 0.1 * d.norm()
    })
    .take(300)
    .collect();
    results.push((
        "warp_jacobian".into(),
        warp_jacobian_fd_check(&points, &locale, H)?,
        1e-4,
    ));

    let mut lines = Vec::new();
    let mut entries = Vec::new();
    let mut all_pass = true;
    for (name, err, tol) in &results {
        let pass = err < tol;
        all_pass &= pass;
        lines.push(format!(
            "{name:<22} max rel err {err:.3e}  (tol {tol:.0e})  {}",
            if pass { "ok" } else { "FAIL" }
        ));
        entries.push(json!({"name": name, "max_relative_error": err, "tolerance": tol, "pass": pass}));
    }
    if !all_pass {
        bail!("gradient checks failed:\n{}", lines.join("\n"));
    }
    Ok((
        json!({"checks": entries, "pass": true}),
        lines.join("\n"),
    ))
}
