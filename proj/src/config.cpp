#include "hvc/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace hvc {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

std::vector<int> parse_int_list(const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(std::stoi(trim(item)));
    return out;
}

std::string format_int_list(const std::vector<int>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(v[i]);
    }
    return s;
}

struct Field {
    std::function<void(Config&, const std::string&)> set;
    std::function<std::string(const Config&)> get;
};

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

const std::map<std::string, Field>& fields() {
#define F_INT(name) {#name, {[](Config& c, const std::string& v) { c.name = std::stoi(v); }, \
                             [](const Config& c) { return std::to_string(c.name); }}}
#define F_DBL(name) {#name, {[](Config& c, const std::string& v) { c.name = std::stod(v); }, \
                             [](const Config& c) { return fmt_double(c.name); }}}
#define F_BOOL(name) {#name, {[](Config& c, const std::string& v) { c.name = std::stoi(v) != 0; }, \
                              [](const Config& c) { return std::string(c.name ? "1" : "0"); }}}
    static const std::map<std::string, Field> table = {
        F_INT(template_size),
        {"pyramid_levels",
         {[](Config& c, const std::string& v) { c.pyramid_levels = parse_int_list(v); },
          [](const Config& c) { return format_int_list(c.pyramid_levels); }}},
        F_INT(d_max),
        F_DBL(softmax_temperature),
        F_DBL(entropy_threshold_scale),
        F_INT(inner_iterations),
        F_INT(refine_iterations),
        F_BOOL(use_refinement),
        F_DBL(refine_trust_region),
        F_DBL(residual_gate),
        F_DBL(peak_ratio_gate),
        F_DBL(confidence_threshold),
        {"head",
         {[](Config& c, const std::string& v) {
              if (v != "analytic" && v != "learned")
                  throw ParseError("head must be 'analytic' or 'learned', got '" + v + "'");
              c.head = v;
          },
          [](const Config& c) { return c.head; }}},
        F_DBL(lambda_d),
        F_DBL(lambda_m),
        F_DBL(lambda_v),
        F_DBL(lr),
        F_DBL(beta1),
        F_DBL(beta2),
        F_INT(batch),
        F_DBL(lr_decay_factor),
        F_INT(lr_decay_epochs),
        F_INT(epochs),
        F_INT(feat_base_channels),
        F_INT(feat_out_channels),
        F_INT(head_trunk_channels),
        F_INT(refine_c0),
        F_INT(refine_c1),
        F_INT(conf_hidden),
        F_INT(conf_epochs),
        F_DBL(conf_lr),
        F_INT(frame_size),
        F_DBL(perturbation),
        F_BOOL(augment),
        F_DBL(photo_brightness),
        F_DBL(photo_contrast),
        F_DBL(photo_saturation),
        F_DBL(photo_blur_max),
        F_INT(occluder_count_min),
        F_INT(occluder_count_max),
        F_DBL(occluder_area_min),
        F_DBL(occluder_area_max),
        F_DBL(occluder_target_fraction),
        F_INT(dataset_pairs),
        F_DBL(refine_perturbation),
        F_INT(refine_pairs_fraction_percent),
        {"seed",
         {[](Config& c, const std::string& v) { c.seed = std::stoull(v); },
          [](const Config& c) { return std::to_string(c.seed); }}},
        F_INT(workers),
    };
#undef F_INT
#undef F_DBL
#undef F_BOOL
    return table;
}

void set_field(Config& cfg, const std::string& key, const std::string& value, int line_no) {
    auto it = fields().find(key);
    if (it == fields().end()) throw ParseError("unknown config key '" + key + "'", line_no);
    try {
        it->second.set(cfg, value);
    } catch (const ParseError&) {
        throw;
    } catch (const std::exception&) {
        throw ParseError("bad value '" + value + "' for key '" + key + "'", line_no);
    }
}

} // namespace

Config Config::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    Config cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const size_t eq = t.find('=');
        if (eq == std::string::npos) throw ParseError("expected 'key = value'", line_no);
        set_field(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)), line_no);
    }
    return cfg;
}

void Config::apply_override(const std::string& kv) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos) throw ParseError("override must look like key=value: " + kv);
    std::string key = trim(kv.substr(0, eq));
    std::string value = trim(kv.substr(eq + 1));
    set_field(*this, key, value, -1);
}

std::string Config::serialize() const {
    std::string out;
    for (const auto& [key, field] : fields()) out += key + " = " + field.get(*this) + "\n";
    return out;
}

void Config::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write config " + path);
    out << serialize();
}

} // namespace hvc
