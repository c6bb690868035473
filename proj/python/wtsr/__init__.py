"""Texture-guided super-resolution: numpy front end for the C++ core.

All image tensors are NCHW float32 numpy arrays with values in [0, 1].
"""

try:
    from ._wtsr import (  # installed wheel: extension lives inside the package
        __version__,
        conv2d,
        degrade,
        diff_map,
        global_avg_pool,
        infer,
        load_image,
        pixel_shuffle,
        pixel_unshuffle,
        psnr,
        resize_bicubic,
        rgb_to_luma,
        save_image,
        sobel_magnitude,
        ssim,
        texture_map,
        train,
    )
except ImportError:  # development tree: extension comes from the build dir
    from _wtsr import (
        __version__,
        conv2d,
        degrade,
        diff_map,
        global_avg_pool,
        infer,
        load_image,
        pixel_shuffle,
        pixel_unshuffle,
        psnr,
        resize_bicubic,
        rgb_to_luma,
        save_image,
        sobel_magnitude,
        ssim,
        texture_map,
        train,
    )

__all__ = [
    "__version__",
    "conv2d",
    "degrade",
    "diff_map",
    "global_avg_pool",
    "infer",
    "load_image",
    "pixel_shuffle",
    "pixel_unshuffle",
    "psnr",
    "resize_bicubic",
    "rgb_to_luma",
    "save_image",
    "sobel_magnitude",
    "ssim",
    "texture_map",
    "train",
]
