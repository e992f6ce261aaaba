use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use latrel::artifact::PipelineArtifact;
use latrel::mathcore::derive_seed;
use latrel::problem::{
    load_csv_dataset, write_labeled_csv, write_unlabeled_csv, CsvDataset, LabeledDataset,
    UnlabeledDataset,
};
use latrel::reliability::{
    draw_mcs_samples, estimate_reliability, export_latent_scatter, oracle_reliability,
};
use latrel::semisup::{generate_datasets, stage, train_pipeline};
use latrel::{Error, Result};

use crate::config::RunConfig;
use crate::Common;

pub fn load(common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    fs::create_dir_all(&cfg.output_dir)?;
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn default_artifact(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir.join("pipeline.json")
}

pub fn generate(cfg: &RunConfig) -> Result<()> {
    let expr = cfg.expression()?;
    let spec = cfg.input_spec()?;
    let (labeled, unlabeled) =
        generate_datasets(&expr, &spec, cfg.data.labeled, cfg.data.unlabeled, cfg.seed)?;
    let labeled_path = cfg.output_dir.join("labeled.csv");
    let unlabeled_path = cfg.output_dir.join("unlabeled.csv");
    let mut w = create(&labeled_path)?;
    write_labeled_csv(&mut w, &labeled)?;
    w.flush()?;
    let mut w = create(&unlabeled_path)?;
    write_unlabeled_csv(&mut w, &unlabeled)?;
    w.flush()?;
    println!(
        "wrote {} labeled rows to {} and {} unlabeled rows to {}",
        labeled.len(),
        labeled_path.display(),
        unlabeled.len(),
        unlabeled_path.display()
    );
    Ok(())
}

fn read_datasets(cfg: &RunConfig) -> Result<(LabeledDataset, UnlabeledDataset)> {
    let labeled_path = cfg
        .data
        .labeled_csv
        .clone()
        .unwrap_or_else(|| cfg.output_dir.join("labeled.csv"));
    let unlabeled_path = cfg
        .data
        .unlabeled_csv
        .clone()
        .unwrap_or_else(|| cfg.output_dir.join("unlabeled.csv"));
    let labeled = match load_csv_dataset(&labeled_path, true)? {
        CsvDataset::Labeled(ds) => ds,
        CsvDataset::Unlabeled(_) => unreachable!("labeled read returns labeled data"),
    };
    let unlabeled = match load_csv_dataset(&unlabeled_path, false)? {
        CsvDataset::Unlabeled(ds) => ds,
        CsvDataset::Labeled(_) => unreachable!("unlabeled read returns unlabeled data"),
    };
    if labeled.dimension() != cfg.problem.dimension {
        return Err(Error::config(
            "problem.dimension",
            format!(
                "{} has {} inputs",
                labeled_path.display(),
                labeled.dimension()
            ),
        ));
    }
    Ok((labeled, unlabeled))
}

pub fn train(cfg: &RunConfig, artifact: Option<&Path>) -> Result<()> {
    let (labeled, unlabeled) = read_datasets(cfg)?;
    let run = train_pipeline(&labeled, &unlabeled, &cfg.pipeline_config(), cfg.seed)?;

    let trace_path = cfg.output_dir.join("trace.csv");
    let mut w = create(&trace_path)?;
    run.trace.write_csv(&mut w)?;
    w.flush()?;

    let path = artifact
        .map(Path::to_path_buf)
        .unwrap_or_else(|| default_artifact(cfg));
    let digest = PipelineArtifact::new(run.pipeline, cfg.hash()).save(&path)?;
    let last = run.trace.generations() - 1;
    println!(
        "trained in {} generations: loss {:.6e} (mse {:.6e}, consistency {:.6e}); autoencoder loss {:.6e}",
        run.trace.generations(),
        run.trace.best_loss[last],
        run.trace.mse_term[last],
        run.trace.consistency_term[last],
        run.autoencoder_trace.last().copied().unwrap_or(f64::NAN),
    );
    println!("artifact {} sha256 {digest}", path.display());
    Ok(())
}

pub fn analyze(cfg: &RunConfig, artifact: Option<&Path>) -> Result<()> {
    let path = artifact
        .map(Path::to_path_buf)
        .unwrap_or_else(|| default_artifact(cfg));
    let artifact = PipelineArtifact::load(&path, Some(cfg.problem.dimension))?;
    let pipeline = &artifact.pipeline;
    let spec = cfg.input_spec()?;
    let expr = cfg.expression()?;
    let mcs = cfg.mcs_config(derive_seed(cfg.seed, stage::MONTE_CARLO))?;

    let mut report = estimate_reliability(pipeline, &spec, &mcs)?;
    report.config_hash = cfg.hash();
    let report_path = cfg.output_dir.join("report.json");
    fs::write(&report_path, report.to_json())?;

    let samples = draw_mcs_samples(&spec, &mcs, cfg.mcs.scatter_count)?;
    let scatter_path = cfg.output_dir.join("latent_scatter.csv");
    let mut w = create(&scatter_path)?;
    export_latent_scatter(pipeline, &samples, Some(&expr), &mut w)?;
    w.flush()?;

    println!(
        "reliability {:.6} ± {:.6} over {} samples ({} failures)",
        report.reliability, report.mc_standard_error, report.sample_count, report.failure_count
    );
    println!(
        "wrote {} and {}",
        report_path.display(),
        scatter_path.display()
    );
    Ok(())
}

pub fn oracle(cfg: &RunConfig) -> Result<()> {
    let spec = cfg.input_spec()?;
    let expr = cfg.expression()?;
    let mcs = cfg.oracle_config(derive_seed(cfg.seed, stage::ORACLE))?;
    let mut report = oracle_reliability(&expr, &spec, &mcs)?;
    report.config_hash = cfg.hash();
    let path = cfg.output_dir.join("oracle_report.json");
    fs::write(&path, report.to_json())?;
    println!(
        "oracle reliability {:.6} ± {:.6} over {} samples",
        report.reliability, report.mc_standard_error, report.sample_count
    );
    println!("wrote {}", path.display());
    Ok(())
}
