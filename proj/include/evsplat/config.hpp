#pragma once

#include "evsplat/trainer.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace evsplat {

// Training configuration as `key = value` text, one entry per line, '#' starts a comment.
// Keys: iterations, seed, deterministic, threads, event_pairs, single_pose, checkpoint_every,
// spatial_extent, background (three numbers), output_dir, w_dssim, w_event, n_latents, c_pos, c_neg,
// lr_position, lr_position_final, lr_color, lr_opacity, lr_scale, lr_rotation.

/// Throws Error(kInvalidArgument) naming the key for unknown keys or unparseable values.
void apply_config_entry(TrainConfig& config, std::string_view key, std::string_view value);

/// Starts from `base`, applies every entry; errors carry file:line.
TrainConfig read_train_config(const std::filesystem::path& path, TrainConfig base = {});

/// Every key, in a form read_train_config parses back to the same config.
std::string format_train_config(const TrainConfig& config);

} // namespace evsplat
