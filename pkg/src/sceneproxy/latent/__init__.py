from .checkpoint import load_checkpoint, load_loss_trace, save_checkpoint, save_loss_trace
from .codec import decode_latent, encode_latent, encode_video
from .model import (
    AdapterState,
    FlowSample,
    ToyDenoiser,
    encode_proxy,
    euler_sample,
    flow_interpolate,
    flow_loss,
    forward_denoise,
    init_adapter,
    init_denoiser,
    inject_residual,
    loss_and_grads,
    sample_flow,
)
from .train import (
    Adam,
    StageConfig,
    StageResult,
    ToyDataset,
    evaluate_loss,
    make_toy_dataset,
    run_stage,
    source_schedule,
)
