"""Event-enhanced Gaussian splatting: event simulation, EDI deblurring, rendering and training."""

from ._evsplat import (
    Camera,
    CameraFile,
    Dataset,
    Error,
    EventStream,
    Gaussian,
    Intrinsics,
    Pose,
    Thresholds,
    accumulate_window,
    bench_render,
    estimate_event_bin,
    evaluate,
    exposure_timestamps,
    load_dataset,
    psnr,
    read_camera_file,
    read_event_file,
    read_scene,
    reconstruct_latents,
    render,
    simulate_dataset,
    simulate_events,
    ssim,
    synthesize_blur,
    to_grayscale,
    train,
    write_event_file,
    write_scene,
)

__all__ = [name for name in dir() if not name.startswith("_")]
