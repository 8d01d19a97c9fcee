#include "gridflow/config.hpp"

#include <fstream>
#include <sstream>

#include "gridflow/rng.hpp"

namespace gridflow {

namespace {

constexpr uint64_t kCityStream = 0x63697479;  // city geometry substream

std::string trim(const std::string& s) {
    const size_t from = s.find_first_not_of(" \t\r");
    if (from == std::string::npos) return "";
    const size_t to = s.find_last_not_of(" \t\r");
    return s.substr(from, to - from + 1);
}

int64_t parse_int(const ConfigEntry& e) {
    try {
        size_t pos = 0;
        const int64_t v = std::stoll(e.value, &pos);
        if (pos != e.value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: " + e.section + "." + e.key + " is not an integer: '" +
                          e.value + "'");
    }
}

uint64_t parse_u64(const ConfigEntry& e) {
    try {
        size_t pos = 0;
        const uint64_t v = std::stoull(e.value, &pos);
        if (pos != e.value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: " + e.section + "." + e.key + " is not an unsigned integer: '" +
                          e.value + "'");
    }
}

double parse_double(const ConfigEntry& e) {
    try {
        size_t pos = 0;
        const double v = std::stod(e.value, &pos);
        if (pos != e.value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: " + e.section + "." + e.key + " is not a number: '" + e.value +
                          "'");
    }
}

bool parse_bool(const ConfigEntry& e) {
    if (e.value == "true" || e.value == "1") return true;
    if (e.value == "false" || e.value == "0") return false;
    throw ConfigError("config: " + e.section + "." + e.key + " is not a boolean: '" + e.value +
                      "'");
}

void apply_entry(RunConfig& cfg, const ConfigEntry& e) {
    const std::string& s = e.section;
    const std::string& k = e.key;
    if (s == "run") {
        if (k == "seed") cfg.seed = parse_u64(e);
        else if (k == "out_dir") cfg.out_dir = e.value;
        else throw ConfigError("config: unknown key run." + k);
    } else if (s == "paths") {
        if (k == "data_dir") cfg.data_dir = e.value;
        else if (k == "masks") cfg.masks_path = e.value;
        else if (k == "pretrain_checkpoint") cfg.pretrain_checkpoint = e.value;
        else if (k == "checkpoint") cfg.checkpoint = e.value;
        else if (k == "report_dir") cfg.report_dir = e.value;
        else throw ConfigError("config: unknown key paths." + k);
    } else if (s == "city") {
        if (k == "seed") cfg.city.seed = parse_u64(e);
        else if (k == "height") cfg.city.height = parse_int(e);
        else if (k == "width") cfg.city.width = parse_int(e);
        else if (k == "road_density") cfg.city.road_density = parse_double(e);
        else if (k == "arterials") cfg.city.n_arterials = parse_int(e);
        else if (k == "noise_level") cfg.city.noise_level = parse_double(e);
        else if (k == "shift_speed_factor") cfg.city.second_half_speed_factor = parse_double(e);
        else if (k == "shift_volume_offset") cfg.city.second_half_volume_offset = parse_double(e);
        else throw ConfigError("config: unknown key city." + k);
    } else if (s == "diurnal") {
        if (k == "morning_peak_frame") cfg.city.diurnal.morning_peak_frame = parse_double(e);
        else if (k == "evening_peak_frame") cfg.city.diurnal.evening_peak_frame = parse_double(e);
        else if (k == "peak_width_frames") cfg.city.diurnal.peak_width_frames = parse_double(e);
        else if (k == "base_volume") cfg.city.diurnal.base_volume = parse_double(e);
        else if (k == "peak_volume") cfg.city.diurnal.peak_volume = parse_double(e);
        else if (k == "base_speed") cfg.city.diurnal.base_speed = parse_double(e);
        else if (k == "congestion_speed_drop")
            cfg.city.diurnal.congestion_speed_drop = parse_double(e);
        else throw ConfigError("config: unknown key diurnal." + k);
    } else if (s == "scenario") {
        if (k == "days_first_half") cfg.days_first_half = parse_int(e);
        else if (k == "days_second_half") cfg.days_second_half = parse_int(e);
        else throw ConfigError("config: unknown key scenario." + k);
    } else if (s == "arch") {
        if (k == "depth") cfg.train.arch.depth = parse_int(e);
        else if (k == "growth") cfg.train.arch.growth = parse_int(e);
        else if (k == "base_channels") cfg.train.arch.base_channels = parse_int(e);
        else if (k == "layers_per_block") cfg.train.arch.layers_per_block = parse_int(e);
        else throw ConfigError("config: unknown key arch." + k);
    } else if (s == "train") {
        if (k == "learning_rate") cfg.train.learning_rate = parse_double(e);
        else if (k == "pretrain_epochs") cfg.train.pretrain_epochs = parse_int(e);
        else if (k == "finetune_epochs") cfg.train.finetune_epochs = parse_int(e);
        else if (k == "batch_size") cfg.train.batch_size = parse_int(e);
        else if (k == "use_mask") cfg.train.use_mask = parse_bool(e);
        else if (k == "use_two_stage") cfg.train.use_two_stage = parse_bool(e);
        else if (k == "train_sample_stride") cfg.train.train_sample_stride = parse_int(e);
        else if (k == "finetune_sample_stride") cfg.train.finetune_sample_stride = parse_int(e);
        else if (k == "eval_sample_stride") cfg.train.eval_sample_stride = parse_int(e);
        else throw ConfigError("config: unknown key train." + k);
    } else {
        throw ConfigError("config: unknown section [" + s + "]");
    }
}

std::string format_double_cfg(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

void RunConfig::finalize() {
    if (city.seed == 0) city.seed = derive_seed(seed, kCityStream);
    train.seed = seed;
    train.arch.input_height = city.height;
    train.arch.input_width = city.width;
    train.arch.in_channels = kSampleInputChannels;
    train.arch.out_channels = kSampleTargetChannels;
}

std::vector<ConfigEntry> parse_ini(const std::string& text) {
    std::vector<ConfigEntry> entries;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string body = trim(line);
        if (body.empty() || body[0] == '#' || body[0] == ';') continue;
        if (body.front() == '[') {
            if (body.back() != ']') {
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": malformed section header: " + body);
            }
            section = trim(body.substr(1, body.size() - 2));
            if (section.empty()) {
                throw ConfigError("config line " + std::to_string(line_no) + ": empty section");
            }
            continue;
        }
        const size_t eq = body.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected key = value, got: " + body);
        }
        ConfigEntry entry;
        entry.section = section;
        entry.key = trim(body.substr(0, eq));
        entry.value = trim(body.substr(eq + 1));
        if (entry.section.empty() || entry.key.empty()) {
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": key outside a section or empty key");
        }
        entries.push_back(std::move(entry));
    }
    return entries;
}

RunConfig make_run_config(const std::vector<ConfigEntry>& entries) {
    RunConfig cfg;
    cfg.city.seed = 0;
    for (const ConfigEntry& e : entries) apply_entry(cfg, e);
    cfg.finalize();
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return make_run_config(parse_ini(text.str()));
}

void apply_override(RunConfig& cfg, const std::string& spec) {
    const size_t eq = spec.find('=');
    const size_t dot = spec.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
        throw ConfigError("override must look like section.key=value, got: " + spec);
    }
    ConfigEntry entry;
    entry.section = spec.substr(0, dot);
    entry.key = spec.substr(dot + 1, eq - dot - 1);
    entry.value = spec.substr(eq + 1);
    apply_entry(cfg, entry);
    cfg.finalize();
}

std::string canonical_config_text(const RunConfig& cfg) {
    std::ostringstream os;
    os << "[run]\n";
    os << "seed = " << cfg.seed << "\n";
    os << "out_dir = " << cfg.out_dir << "\n";
    os << "\n[paths]\n";
    os << "data_dir = " << cfg.data_dir << "\n";
    os << "masks = " << cfg.masks_path << "\n";
    os << "pretrain_checkpoint = " << cfg.pretrain_checkpoint << "\n";
    os << "checkpoint = " << cfg.checkpoint << "\n";
    os << "report_dir = " << cfg.report_dir << "\n";
    os << "\n[city]\n";
    os << "seed = " << cfg.city.seed << "\n";
    os << "height = " << cfg.city.height << "\n";
    os << "width = " << cfg.city.width << "\n";
    os << "road_density = " << format_double_cfg(cfg.city.road_density) << "\n";
    os << "arterials = " << cfg.city.n_arterials << "\n";
    os << "noise_level = " << format_double_cfg(cfg.city.noise_level) << "\n";
    os << "shift_speed_factor = " << format_double_cfg(cfg.city.second_half_speed_factor) << "\n";
    os << "shift_volume_offset = " << format_double_cfg(cfg.city.second_half_volume_offset)
       << "\n";
    os << "\n[diurnal]\n";
    os << "morning_peak_frame = " << format_double_cfg(cfg.city.diurnal.morning_peak_frame)
       << "\n";
    os << "evening_peak_frame = " << format_double_cfg(cfg.city.diurnal.evening_peak_frame)
       << "\n";
    os << "peak_width_frames = " << format_double_cfg(cfg.city.diurnal.peak_width_frames) << "\n";
    os << "base_volume = " << format_double_cfg(cfg.city.diurnal.base_volume) << "\n";
    os << "peak_volume = " << format_double_cfg(cfg.city.diurnal.peak_volume) << "\n";
    os << "base_speed = " << format_double_cfg(cfg.city.diurnal.base_speed) << "\n";
    os << "congestion_speed_drop = "
       << format_double_cfg(cfg.city.diurnal.congestion_speed_drop) << "\n";
    os << "\n[scenario]\n";
    os << "days_first_half = " << cfg.days_first_half << "\n";
    os << "days_second_half = " << cfg.days_second_half << "\n";
    os << "\n[arch]\n";
    os << "depth = " << cfg.train.arch.depth << "\n";
    os << "growth = " << cfg.train.arch.growth << "\n";
    os << "base_channels = " << cfg.train.arch.base_channels << "\n";
    os << "layers_per_block = " << cfg.train.arch.layers_per_block << "\n";
    os << "\n[train]\n";
    os << "learning_rate = " << format_double_cfg(cfg.train.learning_rate) << "\n";
    os << "pretrain_epochs = " << cfg.train.pretrain_epochs << "\n";
    os << "finetune_epochs = " << cfg.train.finetune_epochs << "\n";
    os << "batch_size = " << cfg.train.batch_size << "\n";
    os << "use_mask = " << (cfg.train.use_mask ? "true" : "false") << "\n";
    os << "use_two_stage = " << (cfg.train.use_two_stage ? "true" : "false") << "\n";
    os << "train_sample_stride = " << cfg.train.train_sample_stride << "\n";
    os << "finetune_sample_stride = " << cfg.train.finetune_sample_stride << "\n";
    os << "eval_sample_stride = " << cfg.train.eval_sample_stride << "\n";
    return os.str();
}

uint64_t fnv1a64(const std::string& text) {
    uint64_t hash = 0xcbf29ce484222325ull;
    for (unsigned char ch : text) {
        hash ^= ch;
        hash *= 0x100000001b3ull;
    }
    return hash;
}

}  // namespace gridflow
