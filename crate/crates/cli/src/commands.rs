use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::{SecondsFormat, Utc};
use paneval::embed::{EmbeddingProvider, ProviderConfig};
use paneval::features_io::{read_features, write_atomic, FeatureFormat};
use paneval::fid::{CovarianceMode, FidOptions};
use paneval::image_io::{load_batch, ResizePolicy};
use paneval::report::{merge_reports, MetricKind, ReportFormat, ReportRow, ScoreReport};
use paneval::ssim::{batch_ssim, Pairing, SsimParams};
use paneval::storyscore::{evaluate_manifest, StoryCorpusManifest};
use paneval::{Error, Result, Vector};
use serde_json::json;

use crate::{
    CovarianceArg, FeatureFormatArg, FidArgs, Format, OutputArgs, PairingArg, ProviderArg,
    ReportArgs, ResizeArg, SsimArgs, StoryArgs,
};

const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg"];

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true)
}

fn emit(report: &ScoreReport, output: &OutputArgs) -> Result<()> {
    let format = match output.format {
        Format::Json => ReportFormat::Json,
        Format::Md => ReportFormat::Markdown,
    };
    let text = report.render(format);
    match &output.out {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}

/// Expands a directory or glob into a lexicographically sorted file list.
fn resolve_images(pattern: &str) -> Result<Vec<PathBuf>> {
    let dir = Path::new(pattern);
    let mut paths: Vec<PathBuf> = if dir.is_dir() {
        std::fs::read_dir(dir)
            .map_err(|e| Error::Io {
                path: dir.to_owned(),
                source: e,
            })?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && is_image(p))
            .collect()
    } else {
        glob::glob(pattern)
            .map_err(|e| Error::InvalidInput(format!("bad glob '{pattern}': {e}")))?
            .filter_map(|p| p.ok())
            .filter(|p| p.is_file())
            .collect()
    };
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InvalidInput(format!("'{pattern}' matches no images")));
    }
    Ok(paths)
}

pub fn ssim(args: SsimArgs) -> Result<()> {
    let params = SsimParams {
        window_size: args.window,
        sigma: args.sigma,
        ..SsimParams::default()
    };
    params.validate()?;
    let pairing = match args.pairing {
        PairingArg::Cross => Pairing::Cross,
        PairingArg::Indexed => Pairing::Indexed,
    };
    let policy = match args.resize {
        ResizeArg::Strict => ResizePolicy::Strict,
        ResizeArg::Bilinear => ResizePolicy::BilinearToFirst,
    };
    let cand_paths = resolve_images(&args.candidates)?;
    let targ_paths = resolve_images(&args.targets)?;
    if pairing == Pairing::Indexed && cand_paths.len() != targ_paths.len() {
        return Err(Error::InvalidInput(format!(
            "indexed pairing needs equal batch sizes, got {} candidates and {} targets",
            cand_paths.len(),
            targ_paths.len()
        )));
    }
    let candidates = load_batch(&cand_paths, policy)?;
    let targets = load_batch(&targ_paths, policy)?;
    if candidates.dims() != targets.dims() {
        return Err(Error::DimensionMismatch(format!(
            "candidate images are {:?}, target images are {:?} (height, width)",
            candidates.dims(),
            targets.dims()
        )));
    }
    let result = batch_ssim(candidates.images(), targets.images(), pairing, &params)?;

    let display = |p: &Path| p.display().to_string();
    let pairs: Vec<_> = result
        .pairs
        .iter()
        .map(|p| {
            json!({
                "candidate": display(&cand_paths[p.candidate]),
                "target": display(&targ_paths[p.target]),
                "ssim": p.ssim,
            })
        })
        .collect();
    let label = args.label.unwrap_or_else(|| args.candidates.clone());
    let mut report = ScoreReport::new("ssim", MetricKind::Ssim, now())
        .param("candidates", args.candidates.as_str())
        .param("targets", args.targets.as_str())
        .param("candidate_count", candidates.len())
        .param("target_count", targets.len())
        .param("window", params.window_size)
        .param("sigma", params.sigma)
        .param("k1", params.k1)
        .param("k2", params.k2)
        .param("dynamic_range", params.dynamic_range)
        .param("pairing", pairing.to_string())
        .param("resize", policy.to_string());
    report.rows.push(ReportRow::new(label).with("ssim", result.mean_ssim));
    report.details = json!({ "pairs": pairs });
    emit(&report, &args.output)
}

pub fn fid(args: FidArgs) -> Result<()> {
    let format = match args.feature_format {
        FeatureFormatArg::Binary => FeatureFormat::Binary,
        FeatureFormatArg::Json => FeatureFormat::Json,
        FeatureFormatArg::Csv => FeatureFormat::Csv,
    };
    let opts = FidOptions {
        eps: args.eps,
        covariance_mode: match args.covariance {
            CovarianceArg::Full => CovarianceMode::Full,
            CovarianceArg::Diagonal => CovarianceMode::Diagonal,
        },
    };
    opts.validate()?;
    let candidates = read_features(&args.candidate_features, format)?;
    let targets = read_features(&args.target_features, format)?;
    let value = paneval::fid(&candidates, &targets, &opts)?;

    let label = args
        .label
        .unwrap_or_else(|| args.candidate_features.display().to_string());
    let mut report = ScoreReport::new("fid", MetricKind::Fid, now())
        .param("candidate_features", args.candidate_features.display().to_string())
        .param("target_features", args.target_features.display().to_string())
        .param("feature_format", format.to_string())
        .param("candidate_count", candidates.count())
        .param("target_count", targets.count())
        .param("dim", candidates.dim())
        .param("eps", opts.eps)
        .param("covariance", opts.covariance_mode.to_string());
    report.rows.push(ReportRow::new(label).with("fid", value));
    emit(&report, &args.output)
}

/// Stands in when no provider was requested and every embedding should be pinned.
struct NoProvider;

impl EmbeddingProvider for NoProvider {
    fn embed_texts(&self, _texts: &[&str]) -> Result<Vec<Vector>> {
        Err(Error::InvalidInput(
            "document has no pinned embedding and no --provider was given".into(),
        ))
    }
}

pub fn story_score(args: StoryArgs) -> Result<()> {
    let mut manifest = StoryCorpusManifest::from_path(&args.corpus)?;
    if let Some(g) = args.gamma {
        if !(0.0..=1.0).contains(&g) {
            return Err(Error::InvalidInput(format!("--gamma must lie in [0, 1], got {g}")));
        }
        manifest.gamma = g;
    }
    if !(args.timeout > 0.0 && args.timeout.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "--timeout must be > 0, got {}",
            args.timeout
        )));
    }
    let provider: Box<dyn EmbeddingProvider> = match args.provider {
        None => Box::new(NoProvider),
        Some(kind) => {
            let mut cfg = match kind {
                ProviderArg::Http => ProviderConfig::http(args.endpoint.clone().ok_or_else(|| {
                    Error::InvalidInput("--provider http requires --endpoint".into())
                })?),
                ProviderArg::File => ProviderConfig::file(args.lookup.clone().ok_or_else(|| {
                    Error::InvalidInput("--provider file requires --lookup".into())
                })?),
            };
            cfg.timeout = Duration::from_secs_f64(args.timeout);
            cfg.max_retries = args.max_retries;
            cfg.bearer_token = std::env::var("PANEVAL_EMBED_TOKEN").ok();
            cfg.build()?
        }
    };
    let row = evaluate_manifest(&manifest, provider.as_ref())?;

    let provider_name = match args.provider {
        None => "pinned",
        Some(ProviderArg::Http) => "http",
        Some(ProviderArg::File) => "file",
    };
    let mut report = ScoreReport::new("story-score", MetricKind::StoryScore, now())
        .param("corpus", args.corpus.display().to_string())
        .param("gamma", manifest.gamma)
        .param("provider", provider_name)
        .param("target", manifest.target.id.as_str())
        .param(
            "references",
            manifest
                .references
                .iter()
                .map(|r| r.id.clone())
                .collect::<Vec<_>>(),
        );
    if let Some(endpoint) = &args.endpoint {
        report = report.param("endpoint", endpoint.as_str());
    }
    if let Some(lookup) = &args.lookup {
        report = report.param("lookup", lookup.display().to_string());
    }
    report.rows.push(
        ReportRow::new(row.label)
            .with("similarity", row.similarity)
            .with("plot", row.plot)
            .with("story", row.story),
    );
    emit(&report, &args.output)
}

pub fn report(args: ReportArgs) -> Result<()> {
    let reports = args
        .inputs
        .iter()
        .map(|path| {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            ScoreReport::from_json(&text).map_err(|e| match e {
                Error::Schema { pointer, message } => Error::Schema {
                    pointer: format!("{}#{pointer}", path.display()),
                    message,
                },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let merged = merge_reports(&reports, now())?.param(
        "inputs",
        args.inputs
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>(),
    );
    emit(&merged, &args.output)
}
