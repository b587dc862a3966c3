#include "hvc/synthbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace hvc {

namespace {
using nlohmann::json;

Polygon random_convex_polygon(Rng& rng, const Vec2& center, double target_area) {
    const int k = rng.uniform_int(3, 8);
    std::vector<double> angles(k);
    for (double& a : angles) a = rng.uniform(0.0, 2.0 * M_PI);
    std::sort(angles.begin(), angles.end());
    std::vector<Vec2> pts(k);
    for (int i = 0; i < k; ++i) {
        const double r = rng.uniform(0.5, 1.0);
        pts[i] = center + Vec2(r * std::cos(angles[i]), r * std::sin(angles[i]));
    }
    Polygon poly(pts);
    const double a0 = poly.area();
    if (a0 < 1e-9) return random_convex_polygon(rng, center, target_area);
    const double s = std::sqrt(target_area / a0);
    for (auto& p : poly.pts) p = center + (p - center) * s;
    return poly;
}

void paste_polygon(ImageBuffer& frame, const Polygon& poly, const ImageBuffer& texture, Rng& rng) {
    double x0 = frame.width(), x1 = 0, y0 = frame.height(), y1 = 0;
    for (const auto& p : poly.pts) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
    }
    const int xs = std::max(0, static_cast<int>(std::floor(x0)));
    const int xe = std::min(frame.width() - 1, static_cast<int>(std::ceil(x1)));
    const int ys = std::max(0, static_cast<int>(std::floor(y0)));
    const int ye = std::min(frame.height() - 1, static_cast<int>(std::ceil(y1)));
    if (xe < xs || ye < ys) return;
    const int ox = rng.uniform_int(0, std::max(0, texture.width() - (xe - xs) - 1));
    const int oy = rng.uniform_int(0, std::max(0, texture.height() - (ye - ys) - 1));
    for (int y = ys; y <= ye; ++y)
        for (int x = xs; x <= xe; ++x) {
            if (!poly.contains(Vec2(x, y))) continue;
            const int tx = std::min(ox + (x - xs), texture.width() - 1);
            const int ty = std::min(oy + (y - ys), texture.height() - 1);
            frame.at(x, y) = texture.at(tx, ty);
        }
}

bool point_in_quad(Rng& rng, const Quad& q, Vec2& out, int tries) {
    double x0 = 1e18, x1 = -1e18, y0 = 1e18, y1 = -1e18;
    for (const auto& p : q.corners) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
    }
    for (int i = 0; i < tries; ++i) {
        out = Vec2(rng.uniform(x0, x1), rng.uniform(y0, y1));
        if (q.contains(out)) return true;
    }
    return false;
}

json quad_to_json(const Quad& q) {
    json arr = json::array();
    for (const auto& c : q.corners) {
        arr.push_back(c.x);
        arr.push_back(c.y);
    }
    return arr;
}

Quad quad_from_json(const json& arr) {
    Quad q;
    for (int k = 0; k < 4; ++k) q.corners[k] = Vec2(arr[2 * k].get<double>(), arr[2 * k + 1].get<double>());
    return q;
}

} // namespace

ImageBuffer make_texture(uint64_t seed, int size) {
    Rng rng(seed);
    ImageBuffer img(size, size, 1, 0.5f);
    // low-frequency plaids
    for (int k = 0; k < 3; ++k) {
        const double theta = rng.uniform(0.0, M_PI);
        const double lambda = rng.uniform(20.0, 80.0);
        const double phase = rng.uniform(0.0, 2.0 * M_PI);
        const double amp = rng.uniform(0.08, 0.18);
        const double cx = std::cos(theta) * 2.0 * M_PI / lambda;
        const double cy = std::sin(theta) * 2.0 * M_PI / lambda;
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
                img.at(x, y) += static_cast<float>(amp * std::sin(cx * x + cy * y + phase));
    }
    // soft discs
    const int blobs = 40;
    for (int k = 0; k < blobs; ++k) {
        const double bx = rng.uniform(0.0, size - 1.0);
        const double by = rng.uniform(0.0, size - 1.0);
        const double r = rng.uniform(4.0, 30.0);
        const double amp = rng.uniform(-0.25, 0.25);
        const int xs = std::max(0, static_cast<int>(bx - r - 1));
        const int xe = std::min(size - 1, static_cast<int>(bx + r + 1));
        const int ys = std::max(0, static_cast<int>(by - r - 1));
        const int ye = std::min(size - 1, static_cast<int>(by + r + 1));
        for (int y = ys; y <= ye; ++y)
            for (int x = xs; x <= xe; ++x) {
                const double d2 = ((x - bx) * (x - bx) + (y - by) * (y - by)) / (r * r);
                if (d2 < 1.0) img.at(x, y) += static_cast<float>(amp * (1.0 - d2));
            }
    }
    // fine speckle
    ImageBuffer noise(size, size, 1);
    for (auto& v : noise.data()) v = static_cast<float>(rng.uniform());
    noise = gaussian_blur(noise, 1.0);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            img.at(x, y) += 0.5f * (noise.at(x, y) - 0.5f);
    for (auto& v : img.data()) v = std::min(0.95f, std::max(0.05f, v));
    return img;
}

TrainingSample generate_pair(const ImageBuffer& source, const ImageBuffer& occluder_texture,
                             const GeneratorConfig& cfg, uint64_t seed) {
    Rng rng(seed);
    TrainingSample s;
    s.seed = seed;
    const int fs = cfg.frame_size, ts = cfg.template_size;
    const double margin = (fs - ts) / 2.0;

    s.ref_frame = resize_bilinear(to_gray(source), fs, fs);
    s.window = Quad::rect(margin, margin, margin + ts - 1, margin + ts - 1);

    // corner perturbation, retried until the quad stays strictly convex
    bool ok = false;
    for (int attempt = 0; attempt < cfg.max_retries && !ok; ++attempt) {
        for (int k = 0; k < 4; ++k)
            s.gt_disp.d[k] = Vec2(rng.uniform(-cfg.perturbation, cfg.perturbation),
                                  rng.uniform(-cfg.perturbation, cfg.perturbation));
        for (int k = 0; k < 4; ++k) s.perturbed.corners[k] = s.window.corners[k] + s.gt_disp.d[k];
        ok = s.perturbed.valid();
    }
    if (!ok) throw DegenerateQuad("generate_pair: no valid perturbation after retries");

    // occluders + texture pasting into the tracked frame
    s.trk_frame = s.ref_frame;
    double want_area = 0.0;
    int want_count = 0;
    const double tmpl_area = static_cast<double>(ts) * ts;
    if (cfg.occluder_target_fraction >= 0.0)
        want_area = cfg.occluder_target_fraction * tmpl_area;
    else
        want_count = rng.uniform_int(cfg.occluder_count_min, cfg.occluder_count_max);
    double placed_area = 0.0;
    int placed = 0;
    while ((cfg.occluder_target_fraction >= 0.0 && placed_area < want_area && placed < 64) ||
           (cfg.occluder_target_fraction < 0.0 && placed < want_count)) {
        const double frac = rng.uniform(cfg.occluder_area_min, cfg.occluder_area_max);
        Vec2 center;
        if (!point_in_quad(rng, s.perturbed, center, cfg.max_retries)) break;
        Polygon poly = random_convex_polygon(rng, center, frac * tmpl_area);
        paste_polygon(s.trk_frame, poly, occluder_texture, rng);
        placed_area += poly.area();
        ++placed;
        s.occluders.push_back(std::move(poly));
    }

    if (cfg.augment) {
        s.photo = sample_photo_params(cfg.photo, rng);
        s.trk_frame = photometric_augment(s.trk_frame, s.photo);
    }

    s.h_gt = normalization_homography(s.window, ts, ts);
    s.h_init = normalization_homography(s.perturbed, ts, ts);
    s.ref_template = sample_planar_object(s.ref_frame, s.h_gt, ts, ts);
    s.trk_template = sample_planar_object(s.trk_frame, s.h_init, ts, ts);
    const int levels[3] = {ts / 4, ts / 2, ts};
    for (int i = 0; i < 3; ++i)
        s.gt_vis[i] = gt_visibility(s.window, fs, fs, s.occluders, s.h_init, levels[i], ts);
    return s;
}

SyntheticSequence make_sequence(const ImageBuffer& source, const std::vector<Quad>& quads,
                                int occlude_from, int occlude_to) {
    SyntheticSequence seq;
    if (quads.empty()) return seq;
    const ImageBuffer gray = to_gray(source);
    seq.init_quad = quads.front();
    for (size_t t = 0; t < quads.size(); ++t) {
        // content of the initial quad moves to quads[t]
        const Homography h = solve_homography(quads[t].corners, seq.init_quad.corners);
        WarpResult w = warp_bilinear(gray, h, gray.width(), gray.height());
        ImageBuffer frame = std::move(w.image);
        if (occlude_from >= 0 && static_cast<int>(t) >= occlude_from &&
            static_cast<int>(t) <= occlude_to) {
            double x0 = 1e18, x1 = -1e18, y0 = 1e18, y1 = -1e18;
            for (const auto& c : quads[t].corners) {
                x0 = std::min(x0, c.x);
                x1 = std::max(x1, c.x);
                y0 = std::min(y0, c.y);
                y1 = std::max(y1, c.y);
            }
            Rng rng(1234 + t);
            for (int y = std::max(0, static_cast<int>(y0) - 4);
                 y <= std::min(frame.height() - 1, static_cast<int>(y1) + 4); ++y)
                for (int x = std::max(0, static_cast<int>(x0) - 4);
                     x <= std::min(frame.width() - 1, static_cast<int>(x1) + 4); ++x)
                    frame.at(x, y) = static_cast<float>(0.5 + 0.05 * rng.normal());
        }
        seq.frames.push_back(std::move(frame));
        seq.gt_quads.push_back(quads[t]);
    }
    return seq;
}

// ---------------------------------------------------------------------------

double metric_ae(const Quad& pred, const Quad& gt, bool rms) {
    double acc = 0.0;
    for (int k = 0; k < 4; ++k) {
        const double d = (pred.corners[k] - gt.corners[k]).norm();
        acc += rms ? d * d : d;
    }
    return rms ? std::sqrt(acc / 4.0) : acc / 4.0;
}

double metric_hd(const Homography& h_pred, const Homography& h_gt, const Quad& reference_quad,
                 bool mean) {
    double acc = 0.0;
    for (int k = 0; k < 4; ++k) {
        const Vec2 a = h_pred.apply(reference_quad.corners[k]);
        const Vec2 b = h_gt.apply(reference_quad.corners[k]);
        const double d = (a - b).norm();
        acc += mean ? d : d * d;
    }
    return mean ? acc / 4.0 : std::sqrt(acc / 4.0);
}

std::vector<CurvePoint> curve_from_errors(const std::vector<std::optional<double>>& errors,
                                          const std::vector<double>& thresholds) {
    size_t total = 0;
    for (const auto& e : errors) total += e.has_value();
    std::vector<CurvePoint> curve;
    curve.reserve(thresholds.size());
    for (double t : thresholds) {
        size_t hit = 0;
        for (const auto& e : errors)
            if (e && *e <= t) ++hit;
        curve.push_back({t, total > 0 ? static_cast<double>(hit) / total : 0.0});
    }
    return curve;
}

// ---------------------------------------------------------------------------

SequenceAnnotation read_annotations(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    SequenceAnnotation ann;
    std::string line;
    int line_no = 0;
    long expected = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream is(line);
        long idx;
        if (!(is >> idx)) throw ParseError("bad frame index", line_no);
        if (idx != expected) throw ParseError("frame indices must be contiguous", line_no);
        ++expected;
        std::string first;
        if (!(is >> first)) throw ParseError("missing quad or '-'", line_no);
        if (first == "-") {
            ann.frames.push_back(std::nullopt);
            continue;
        }
        Quad q;
        try {
            q.corners[0].x = std::stod(first);
        } catch (...) {
            throw ParseError("bad coordinate", line_no);
        }
        double vals[7];
        for (double& v : vals)
            if (!(is >> v)) throw ParseError("expected 8 coordinates", line_no);
        q.corners[0].y = vals[0];
        q.corners[1] = Vec2(vals[1], vals[2]);
        q.corners[2] = Vec2(vals[3], vals[4]);
        q.corners[3] = Vec2(vals[5], vals[6]);
        ann.frames.push_back(q);
    }
    return ann;
}

void write_annotations(const std::string& path, const SequenceAnnotation& ann) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    char buf[512];
    for (size_t i = 0; i < ann.frames.size(); ++i) {
        if (!ann.frames[i]) {
            out << i << " -\n";
            continue;
        }
        const Quad& q = *ann.frames[i];
        std::snprintf(buf, sizeof(buf), "%zu %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n", i,
                      q.corners[0].x, q.corners[0].y, q.corners[1].x, q.corners[1].y,
                      q.corners[2].x, q.corners[2].y, q.corners[3].x, q.corners[3].y);
        out << buf;
    }
}

std::vector<TrackRecord> read_results(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<TrackRecord> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream is(line);
        TrackRecord r;
        std::array<double, 9> m;
        int lost = 0;
        if (!(is >> r.frame_index)) throw ParseError("bad frame index", line_no);
        for (double& v : m)
            if (!(is >> v)) throw ParseError("expected 9 homography floats", line_no);
        if (!(is >> r.confidence >> lost)) throw ParseError("expected confidence and lost flag", line_no);
        r.h = Homography(m);
        r.lost = lost != 0;
        out.push_back(r);
    }
    return out;
}

void write_results(const std::string& path, const std::vector<TrackRecord>& records) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    for (const auto& r : records) {
        out << r.frame_index << ' ' << r.h.to_text() << ' ';
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", r.confidence);
        out << buf << ' ' << (r.lost ? 1 : 0) << '\n';
    }
}

EvalSeries evaluate_results(const std::vector<TrackRecord>& results,
                            const SequenceAnnotation& ann, bool ae_rms, bool hd_mean) {
    EvalSeries s;
    const auto ref = ann.first_valid();
    if (!ref) throw LengthMismatch("annotation has no valid quad to act as reference");
    s.reference_quad = *ref;
    s.ae.resize(ann.frames.size());
    s.hd.resize(ann.frames.size());
    for (const auto& r : results) {
        if (r.frame_index < 0 || r.frame_index >= static_cast<long>(ann.frames.size()))
            throw LengthMismatch("result frame " + std::to_string(r.frame_index) +
                                 " has no annotation");
        const auto& gt = ann.frames[r.frame_index];
        if (!gt) continue; // absent GT excluded from the denominator
        const Quad pred = map_quad(r.h, s.reference_quad);
        const Homography h_gt = solve_homography(s.reference_quad.corners, gt->corners);
        s.ae[r.frame_index] = metric_ae(pred, *gt, ae_rms);
        s.hd[r.frame_index] = metric_hd(r.h, h_gt, s.reference_quad, hd_mean);
    }
    return s;
}

std::vector<CurvePoint> precision_curve(const EvalSeries& s, const std::vector<double>& thresholds) {
    return curve_from_errors(s.ae, thresholds);
}

std::vector<CurvePoint> success_curve(const EvalSeries& s, const std::vector<double>& thresholds) {
    return curve_from_errors(s.hd, thresholds);
}

double success_rate_at5(const EvalSeries& s) {
    size_t total = 0, hit = 0;
    for (const auto& e : s.ae) {
        if (!e) continue;
        ++total;
        hit += *e < 5.0;
    }
    return total > 0 ? static_cast<double>(hit) / total : 0.0;
}

// ---------------------------------------------------------------------------
// Dataset archives.

void write_sample(const DatasetPaths& ds, int index, const TrainingSample& s,
                  const std::string& split) {
    namespace fs = std::filesystem;
    fs::create_directories(ds.root + "/frames");
    fs::create_directories(ds.root + "/templates");
    fs::create_directories(ds.root + "/masks");
    char id[32];
    std::snprintf(id, sizeof(id), "%06d", index);
    const std::string ref_png = "frames/" + std::string(id) + "_ref.png";
    const std::string trk_png = "frames/" + std::string(id) + "_trk.png";
    write_png(ds.root + "/" + ref_png, s.ref_frame);
    write_png(ds.root + "/" + trk_png, s.trk_frame);
    write_png(ds.root + "/templates/" + id + "_ref.png", s.ref_template.image);
    write_png(ds.root + "/templates/" + id + "_trk.png", s.trk_template.image);
    for (int i = 0; i < 3; ++i)
        write_png(ds.root + "/masks/" + id + "_vis" + std::to_string(s.gt_vis[i].width) + ".png",
                  visibility_to_image(s.gt_vis[i]));

    json rec;
    rec["index"] = index;
    rec["split"] = split;
    rec["seed"] = s.seed;
    rec["source"] = s.source_id;
    json disp = json::array();
    for (const auto& d : s.gt_disp.d) {
        disp.push_back(d.x);
        disp.push_back(d.y);
    }
    rec["gt_disp"] = disp;
    rec["window"] = quad_to_json(s.window);
    rec["perturbed"] = quad_to_json(s.perturbed);
    json occ = json::array();
    for (const auto& poly : s.occluders) {
        json pts = json::array();
        for (const auto& p : poly.pts) {
            pts.push_back(p.x);
            pts.push_back(p.y);
        }
        occ.push_back(pts);
    }
    rec["occluders"] = occ;
    rec["photo"] = {{"brightness", s.photo.brightness},
                    {"contrast", s.photo.contrast},
                    {"saturation", s.photo.saturation},
                    {"blur_sigma", s.photo.blur_sigma}};
    rec["ref_frame"] = ref_png;
    rec["trk_frame"] = trk_png;

    std::ofstream out(ds.manifest(), std::ios::app);
    if (!out) throw IoError("cannot append to " + ds.manifest());
    out << rec.dump() << '\n';
}

std::vector<SampleRecord> read_manifest(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot open " + manifest_path);
    std::vector<SampleRecord> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(std::string("bad manifest JSON: ") + e.what(), line_no);
        }
        SampleRecord r;
        r.index = rec.at("index").get<int>();
        r.split = rec.at("split").get<std::string>();
        r.seed = rec.at("seed").get<uint64_t>();
        r.source_id = rec.at("source").get<std::string>();
        const auto& disp = rec.at("gt_disp");
        for (int k = 0; k < 4; ++k)
            r.gt_disp.d[k] = Vec2(disp[2 * k].get<double>(), disp[2 * k + 1].get<double>());
        r.window = quad_from_json(rec.at("window"));
        r.perturbed = quad_from_json(rec.at("perturbed"));
        for (const auto& pts : rec.at("occluders")) {
            Polygon poly;
            for (size_t i = 0; i + 1 < pts.size(); i += 2)
                poly.pts.emplace_back(pts[i].get<double>(), pts[i + 1].get<double>());
            r.occluders.push_back(std::move(poly));
        }
        const auto& ph = rec.at("photo");
        r.photo.brightness = ph.at("brightness").get<double>();
        r.photo.contrast = ph.at("contrast").get<double>();
        r.photo.saturation = ph.at("saturation").get<double>();
        r.photo.blur_sigma = ph.at("blur_sigma").get<double>();
        r.ref_frame_png = rec.at("ref_frame").get<std::string>();
        r.trk_frame_png = rec.at("trk_frame").get<std::string>();
        out.push_back(std::move(r));
    }
    return out;
}

TrainingSample load_sample(const DatasetPaths& ds, const SampleRecord& rec, int template_size) {
    TrainingSample s;
    s.seed = rec.seed;
    s.source_id = rec.source_id;
    s.gt_disp = rec.gt_disp;
    s.window = rec.window;
    s.perturbed = rec.perturbed;
    s.occluders = rec.occluders;
    s.photo = rec.photo;
    s.ref_frame = read_png(ds.root + "/" + rec.ref_frame_png);
    s.trk_frame = read_png(ds.root + "/" + rec.trk_frame_png);
    const int ts = template_size;
    const int fs = s.ref_frame.width();
    s.h_gt = normalization_homography(s.window, ts, ts);
    s.h_init = normalization_homography(s.perturbed, ts, ts);
    s.ref_template = sample_planar_object(s.ref_frame, s.h_gt, ts, ts);
    s.trk_template = sample_planar_object(s.trk_frame, s.h_init, ts, ts);
    const int levels[3] = {ts / 4, ts / 2, ts};
    for (int i = 0; i < 3; ++i)
        s.gt_vis[i] = gt_visibility(s.window, fs, fs, s.occluders, s.h_init, levels[i], ts);
    return s;
}

// ---------------------------------------------------------------------------

PairEvaluation evaluate_pair(const TrainingSample& sample, const TrackerModel& model,
                             const TrackerConfig& cfg) {
    TrackState state = init_track(sample.ref_frame, sample.window, model, cfg);
    EstimationPass pass = run_estimation(state, sample.trk_frame, sample.h_init, model, cfg);

    PairEvaluation ev;
    ev.degenerate = pass.degenerate;
    ev.confidence = pass.confidence;
    ev.stats = pass.stats;
    ev.vis = pass.vis;
    // predicted quad in the tracked frame vs the ground-truth window
    const Quad pred = map_quad(invert(pass.h_jn),
                               Quad::template_rect(cfg.template_size, cfg.template_size));
    ev.ae = metric_ae(pred, sample.window);
    const Homography pred_s = compose(pass.h_jn, invert(sample.h_init));
    ev.pred_disp = homography_to_four_point(pred_s, cfg.template_size, cfg.template_size);
    ev.l_d = loss_homography(ev.pred_disp, sample.gt_disp);
    return ev;
}

} // namespace hvc
