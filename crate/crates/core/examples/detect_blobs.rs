//! Rank the points of noisy blobs and report precision at q = 20.
//!
//! cargo run --release --example detect_blobs

use ifclass::benchmark::{inject_label_noise, precision_at_q, sample_reference, BlobSpec, NoiseSpec};
use ifclass::detection::{detect, Algorithm, DetectOptions};
use ifclass::influence::{MeasureKind, ModelArtifacts, SimilarityMeasure};
use ifclass::model::{train, MlpConfig};

fn main() -> ifclass::Result<()> {
    let clean = BlobSpec::new(600, 3, 2, 5.0).generate(0)?;
    let (noisy, mask) = inject_label_noise(&clean, &NoiseSpec::new(0.2, 1))?;
    let mut cfg = MlpConfig::new(2, vec![32], 3);
    cfg.epochs = 500;
    let model: ModelArtifacts = train(&noisy, &cfg)?.into();
    let reference = sample_reference(&noisy, &mask, 50, 2)?;
    for alg in Algorithm::ALL {
        let ranked = detect(
            alg,
            &noisy,
            &reference,
            SimilarityMeasure::new(MeasureKind::Gd),
            &model,
            DetectOptions::default(),
        )?;
        println!("{alg}: precision@20 = {:.3}", precision_at_q(&ranked, &mask, 20.0)?);
    }
    Ok(())
}
