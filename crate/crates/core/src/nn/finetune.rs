use super::mlp::Mlp;
use super::train::{fit_from, Labeled, TrainConfig, TrainReport};
use crate::error::{Error, Result};
use crate::sae::Sae;

/// Step 3: retrain only the decision layer on SAE reconstructions
/// `ĥ = Mᵀ·ReLU(M·g(x) + b)`. The representation layers and the SAE are
/// read-only here; the returned model shares `hidden` with the input.
///
/// The loss is the step-1 objective; the L1 term over the frozen layers is
/// constant and therefore dropped. Dropout is not used.
pub fn finetune_head(
    model: &Mlp,
    sae: &Sae,
    train: Labeled<'_>,
    val: Labeled<'_>,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    if sae.d_in() != model.d_in() {
        return Err(Error::shape("SAE input vs penultimate width", model.d_in(), sae.d_in()));
    }
    let recon_train = sae.reconstruct(&model.represent(&train.x.view())?.view())?;
    let recon_val = sae.reconstruct(&model.represent(&val.x.view())?.view())?;

    let head_only = Mlp {
        hidden: Vec::new(),
        head: model.head.clone(),
    };
    let cfg = TrainConfig {
        dropout: 0.0,
        ..cfg.clone()
    };
    let report = fit_from(
        head_only,
        Labeled::new(&recon_train, train.y),
        Labeled::new(&recon_val, val.y),
        &cfg,
    )?;
    Ok(TrainReport {
        model: Mlp {
            hidden: model.hidden.clone(),
            head: report.model.head,
        },
        ..report
    })
}
