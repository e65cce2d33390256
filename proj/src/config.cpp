#include "evsplat/config.hpp"

#include "text_util.hpp"

#include <sstream>

namespace evsplat {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
    fail(ErrorCode::kInvalidArgument, "config key '" + std::string(key) + "': cannot parse '" + std::string(value) + "'");
}

template <typename T>
T number(std::string_view key, std::string_view value) {
    T out{};
    if (!detail::parse_number(value, out)) bad_value(key, value);
    return out;
}

bool boolean(std::string_view key, std::string_view value) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
    if (value == "false" || value == "0" || value == "no" || value == "off") return false;
    bad_value(key, value);
}

} // namespace

void apply_config_entry(TrainConfig& c, std::string_view key, std::string_view value) {
    value = trim(value);
    if (key == "iterations") c.iterations = number<int>(key, value);
    else if (key == "seed") c.seed = number<std::uint64_t>(key, value);
    else if (key == "deterministic") c.deterministic = boolean(key, value);
    else if (key == "threads") c.threads = number<int>(key, value);
    else if (key == "event_pairs") c.event_pairs = number<int>(key, value);
    else if (key == "single_pose") c.single_pose = boolean(key, value);
    else if (key == "checkpoint_every") c.checkpoint_every = number<int>(key, value);
    else if (key == "spatial_extent") c.spatial_extent = number<double>(key, value);
    else if (key == "output_dir") c.output_dir = std::string(value);
    else if (key == "w_dssim") c.weights.w_dssim = number<double>(key, value);
    else if (key == "w_event") c.weights.w_event = number<double>(key, value);
    else if (key == "n_latents") c.weights.n = number<int>(key, value);
    else if (key == "c_pos") c.weights.thresholds.c_pos = number<double>(key, value);
    else if (key == "c_neg") c.weights.thresholds.c_neg = number<double>(key, value);
    else if (key == "lr_position") c.learning_rates.position = number<double>(key, value);
    else if (key == "lr_position_final") c.learning_rates.position_final = number<double>(key, value);
    else if (key == "lr_color") c.learning_rates.color = number<double>(key, value);
    else if (key == "lr_opacity") c.learning_rates.opacity = number<double>(key, value);
    else if (key == "lr_scale") c.learning_rates.scale = number<double>(key, value);
    else if (key == "lr_rotation") c.learning_rates.rotation = number<double>(key, value);
    else if (key == "background") {
        const auto fields = detail::split_fields(value);
        if (fields.size() != 3) bad_value(key, value);
        for (int i = 0; i < 3; ++i) c.background[i] = number<double>(key, fields[i]);
    } else {
        fail(ErrorCode::kInvalidArgument, "unknown config key '" + std::string(key) + "'");
    }
}

TrainConfig read_train_config(const std::filesystem::path& path, TrainConfig base) {
    auto in = detail::open_for_reading(path);
    std::string line;
    std::size_t number_of_line = 0;
    while (std::getline(in, line)) {
        ++number_of_line;
        if (detail::is_blank_or_comment(line)) continue;
        std::string_view text = line;
        if (const auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
        const auto eq = text.find('=');
        if (eq == std::string_view::npos) {
            fail(ErrorCode::kParseError, detail::where(path, number_of_line) + ": expected key = value");
        }
        try {
            apply_config_entry(base, trim(text.substr(0, eq)), text.substr(eq + 1));
        } catch (const Error& e) {
            fail(ErrorCode::kParseError, detail::where(path, number_of_line) + ": " + e.what());
        }
    }
    return base;
}

std::string format_train_config(const TrainConfig& c) {
    using detail::format_double;
    std::ostringstream out;
    out << "iterations = " << c.iterations << '\n'
        << "seed = " << c.seed << '\n'
        << "deterministic = " << (c.deterministic ? "true" : "false") << '\n'
        << "threads = " << c.threads << '\n'
        << "event_pairs = " << c.event_pairs << '\n'
        << "single_pose = " << (c.single_pose ? "true" : "false") << '\n'
        << "checkpoint_every = " << c.checkpoint_every << '\n'
        << "spatial_extent = " << format_double(c.spatial_extent) << '\n'
        << "background = " << format_double(c.background[0]) << ' ' << format_double(c.background[1]) << ' '
        << format_double(c.background[2]) << '\n'
        << "w_dssim = " << format_double(c.weights.w_dssim) << '\n'
        << "w_event = " << format_double(c.weights.w_event) << '\n'
        << "n_latents = " << c.weights.n << '\n'
        << "c_pos = " << format_double(c.weights.thresholds.c_pos) << '\n'
        << "c_neg = " << format_double(c.weights.thresholds.c_neg) << '\n'
        << "lr_position = " << format_double(c.learning_rates.position) << '\n'
        << "lr_position_final = " << format_double(c.learning_rates.position_final) << '\n'
        << "lr_color = " << format_double(c.learning_rates.color) << '\n'
        << "lr_opacity = " << format_double(c.learning_rates.opacity) << '\n'
        << "lr_scale = " << format_double(c.learning_rates.scale) << '\n'
        << "lr_rotation = " << format_double(c.learning_rates.rotation) << '\n';
    if (!c.output_dir.empty()) out << "output_dir = " << c.output_dir.string() << '\n';
    return out.str();
}

} // namespace evsplat
