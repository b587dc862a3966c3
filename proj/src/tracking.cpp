#include "hvc/tracking.hpp"

#include <algorithm>
#include <cmath>

namespace hvc {

std::vector<TensorRef> ConfidenceHead::param_refs() {
    return {
        {"conf.w1", &w1, {n_hidden, n_in}}, {"conf.b1", &b1, {n_hidden}},
        {"conf.w2", &w2, {n_hidden}},       {"conf.mean", &in_mean, {n_in}},
        {"conf.std", &in_std, {n_in}},
    };
}

namespace {

double head_forward(const std::vector<double>& stats, const ConfidenceHead& head,
                    std::vector<double>* hidden_out) {
    std::vector<double> h(head.n_hidden);
    for (int j = 0; j < head.n_hidden; ++j) {
        double z = head.b1[j];
        for (int i = 0; i < head.n_in; ++i) {
            const double x = (stats[i] - head.in_mean[i]) / head.in_std[i];
            z += head.w1[static_cast<size_t>(j) * head.n_in + i] * x;
        }
        h[j] = std::tanh(z);
    }
    double z2 = head.b2;
    for (int j = 0; j < head.n_hidden; ++j) z2 += head.w2[j] * h[j];
    if (hidden_out) *hidden_out = std::move(h);
    return 1.0 / (1.0 + std::exp(-z2));
}

} // namespace

double confidence_score(const std::vector<double>& stats, const ConfidenceHead& head) {
    if (static_cast<int>(stats.size()) != head.n_in)
        throw ShapeMismatch("confidence_score: statistics length " + std::to_string(stats.size()) +
                            " != head input " + std::to_string(head.n_in));
    return head_forward(stats, head, nullptr);
}

ConfidenceHead train_confidence(const std::vector<ConfidenceSample>& data,
                                int n_in, const ConfidenceTrainConfig& cfg) {
    size_t pos = 0, neg = 0;
    for (const auto& s : data) (s.label ? pos : neg) += 1;
    if (pos == 0 || neg == 0)
        throw DegenerateDataset("confidence training needs both classes, got " +
                                std::to_string(pos) + " positive / " + std::to_string(neg) +
                                " negative");

    ConfidenceHead head(n_in);
    Rng rng(cfg.seed);
    // input standardization from the dataset
    for (int i = 0; i < n_in; ++i) {
        double m = 0.0;
        for (const auto& s : data) m += s.stats[i];
        m /= static_cast<double>(data.size());
        double var = 0.0;
        for (const auto& s : data) var += (s.stats[i] - m) * (s.stats[i] - m);
        var /= static_cast<double>(data.size());
        head.in_mean[i] = m;
        head.in_std[i] = std::max(std::sqrt(var), 1e-6);
    }
    for (double& v : head.w1) v = rng.normal(0.0, 0.3);
    for (double& v : head.w2) v = rng.normal(0.0, 0.3);

    const size_t n_params = head.w1.size() + head.b1.size() + head.w2.size() + 1;
    std::vector<double> m_state(n_params, 0.0), v_state(n_params, 0.0);
    long t = 0;

    std::vector<size_t> order(data.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<double> gw1(head.w1.size()), gb1(head.b1.size()), gw2(head.w2.size());
    double gb2 = 0.0;
    std::vector<uint8_t> keep(head.n_hidden);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates with the deterministic rng
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.uniform_int(0, static_cast<int>(i) - 1)]);
        for (size_t start = 0; start < order.size(); start += cfg.batch) {
            const size_t end = std::min(order.size(), start + cfg.batch);
            std::fill(gw1.begin(), gw1.end(), 0.0);
            std::fill(gb1.begin(), gb1.end(), 0.0);
            std::fill(gw2.begin(), gw2.end(), 0.0);
            gb2 = 0.0;
            for (size_t bi = start; bi < end; ++bi) {
                const auto& s = data[order[bi]];
                // hidden with inverted dropout
                std::vector<double> x(n_in), z1(head.n_hidden), h(head.n_hidden);
                for (int i = 0; i < n_in; ++i)
                    x[i] = (s.stats[i] - head.in_mean[i]) / head.in_std[i];
                for (int j = 0; j < head.n_hidden; ++j) {
                    double z = head.b1[j];
                    for (int i = 0; i < n_in; ++i)
                        z += head.w1[static_cast<size_t>(j) * n_in + i] * x[i];
                    z1[j] = z;
                    keep[j] = rng.uniform() >= head.dropout;
                    h[j] = keep[j] ? std::tanh(z) / (1.0 - head.dropout) : 0.0;
                }
                double z2 = head.b2;
                for (int j = 0; j < head.n_hidden; ++j) z2 += head.w2[j] * h[j];
                const double p = 1.0 / (1.0 + std::exp(-z2));
                const double g2 = p - static_cast<double>(s.label); // dBCE/dz2
                gb2 += g2;
                for (int j = 0; j < head.n_hidden; ++j) {
                    gw2[j] += g2 * h[j];
                    if (!keep[j]) continue;
                    const double th = std::tanh(z1[j]);
                    const double gh = g2 * head.w2[j] / (1.0 - head.dropout);
                    const double gz1 = gh * (1.0 - th * th);
                    gb1[j] += gz1;
                    for (int i = 0; i < n_in; ++i)
                        gw1[static_cast<size_t>(j) * n_in + i] += gz1 * x[i];
                }
            }
            const double inv = 1.0 / static_cast<double>(end - start);
            // Adam over the flat parameter list
            ++t;
            const double bc1 = 1.0 - std::pow(0.9, static_cast<double>(t));
            const double bc2 = 1.0 - std::pow(0.999, static_cast<double>(t));
            size_t k = 0;
            auto step = [&](double& w, double g) {
                g *= inv;
                m_state[k] = 0.9 * m_state[k] + 0.1 * g;
                v_state[k] = 0.999 * v_state[k] + 0.001 * g * g;
                w -= cfg.lr * (m_state[k] / bc1) / (std::sqrt(v_state[k] / bc2) + 1e-8);
                ++k;
            };
            for (size_t i = 0; i < head.w1.size(); ++i) step(head.w1[i], gw1[i]);
            for (size_t i = 0; i < head.b1.size(); ++i) step(head.b1[i], gb1[i]);
            for (size_t i = 0; i < head.w2.size(); ++i) step(head.w2[i], gw2[i]);
            step(head.b2, gb2);
        }
    }
    return head;
}

// ---------------------------------------------------------------------------

TrackState init_track(const ImageBuffer& reference_frame, const Quad& quad,
                      const TrackerModel& model, const TrackerConfig& cfg) {
    if (!quad.valid()) throw DegenerateQuad("init_track: invalid quad");
    for (const auto& c : quad.corners)
        if (c.x < 0 || c.y < 0 || c.x > reference_frame.width() - 1 ||
            c.y > reference_frame.height() - 1)
            throw QuadOutOfFrame("init_track: quad corner outside the frame");

    TrackState st;
    st.ref_quad = quad;
    st.h_in = normalization_homography(quad, cfg.template_size, cfg.template_size);
    const ImageBuffer gray = to_gray(reference_frame);
    const Extractor ex = model.extractor();
    for (int level : cfg.pyramid_levels) {
        Template t = sample_planar_object(gray, st.h_in, level, cfg.template_size);
        st.ref_features.push_back(extract(t, ex));
        st.ref_templates.push_back(std::move(t));
    }
    st.h_jn = st.h_in;
    st.frame_counter = 0;
    st.ring.push_back({0, st.h_in, 1.0});
    return st;
}

EstimationPass run_estimation(const TrackState& state, const ImageBuffer& frame,
                              const Homography& h_init, const TrackerModel& model,
                              const TrackerConfig& cfg) {
    EstimationPass pass;
    pass.h_jn = h_init;
    const ImageBuffer gray = to_gray(frame);
    const Extractor ex = model.extractor();
    const int full = cfg.template_size;
    std::vector<CostVolume> level_cvs;
    level_cvs.reserve(cfg.pyramid_levels.size());

    for (size_t li = 0; li < cfg.pyramid_levels.size(); ++li) {
        const int level = cfg.pyramid_levels[li];
        const double up = static_cast<double>(full - 1) / (level - 1);
        const Homography scale_up = Homography::scaling(up, up);
        const Homography scale_dn = Homography::scaling(1.0 / up, 1.0 / up);
        CostVolume level_cv;
        for (int inner = 0; inner < cfg.inner_iterations; ++inner) {
            Template t_cur = sample_planar_object(gray, pass.h_jn, level, full);
            FeatureMap f_cur = extract(t_cur, ex);
            level_cv = build_cost_volume(state.ref_features[li], f_cur, cfg.d_max);
            IncrementEstimate inc;
            bool ok = true;
            try {
                if (model.head_kind == HeadKind::Learned) {
                    if (!model.head) throw WeightTopologyMismatch("learned head not loaded");
                    inc = estimate_increment_learned(level_cv, *model.head);
                } else {
                    const DisplacementField field =
                        soft_argmax_decode(level_cv, cfg.softmax_temperature);
                    ValidityMask prior(t_cur.valid.size());
                    for (size_t i = 0; i < prior.size(); ++i)
                        prior[i] = t_cur.valid[i] && state.ref_templates[li].valid[i];
                    inc = estimate_increment_analytic(field, prior, cfg.analytic);
                }
            } catch (const InsufficientSupport&) {
                ok = false;
                pass.degenerate = true;
            } catch (const DegenerateQuad&) {
                ok = false;
                pass.degenerate = true;
            }
            if (!ok) break;
            Homography h_s_level;
            try {
                h_s_level = four_point_to_homography(inc.disp, level, level);
            } catch (const DegenerateQuad&) {
                pass.degenerate = true;
                break;
            }
            const Homography h_s_full = compose(scale_up, compose(h_s_level, scale_dn));
            pass.h_jn = surrogate_update(pass.h_jn, h_s_full);
            if (level == full) pass.vis = inc.vis;
        }
        level_cvs.push_back(std::move(level_cv));
    }

    if (cfg.use_refinement) {
        RefineConfig rc;
        rc.trust_region = cfg.refine_trust_region;
        if (model.refine_net) {
            rc.mode = RefineMode::Learned;
            rc.net = model.refine_net.get();
        }
        const Template& ref_full = state.ref_templates.back();
        for (int it = 0; it < cfg.refine_iterations; ++it) {
            Template t_cur = sample_planar_object(gray, pass.h_jn, full, full);
            IncrementEstimate inc = refine(ref_full, t_cur, rc);
            Homography h_s;
            try {
                h_s = four_point_to_homography(inc.disp, full, full);
            } catch (const DegenerateQuad&) {
                pass.degenerate = true;
                break;
            }
            pass.h_jn = surrogate_update(pass.h_jn, h_s);
        }
    }

    if (pass.vis.values.empty()) pass.vis = VisibilityMask(full, full, 0.0f);
    StatisticsConfig sc;
    sc.temperature = cfg.softmax_temperature;
    sc.entropy_threshold_scale = cfg.entropy_threshold_scale;
    pass.stats = cost_volume_statistics(level_cvs, sc);
    pass.confidence = pass.degenerate
                          ? 0.0
                          : confidence_score(pass.stats, model.confidence);
    return pass;
}

std::vector<TrackState::BufferEntry> reboot_candidates(const TrackState& state) {
    static const int kAges[] = {2, 4, 8, 16, 32, 60};
    const long now = state.frame_counter;
    std::vector<TrackState::BufferEntry> out;
    for (int age : kAges) {
        const long target = now - age;
        const TrackState::BufferEntry* best = nullptr;
        long best_gap = 0;
        for (const auto& e : state.ring) {
            const long gap = std::abs(e.frame_index - target);
            if (!best || gap < best_gap) {
                best = &e;
                best_gap = gap;
            }
        }
        if (!best) continue;
        bool dup = false;
        for (const auto& e : out) dup = dup || e.frame_index == best->frame_index;
        if (!dup) out.push_back(*best);
    }
    return out;
}

FrameResult track_frame(TrackState& state, const ImageBuffer& frame,
                        const TrackerModel& model, const TrackerConfig& cfg) {
    state.frame_counter += 1;
    EstimationPass best = run_estimation(state, frame, state.h_jn, model, cfg);
    int reboots = 0;
    if (best.confidence < cfg.confidence_threshold) {
        for (const auto& cand : reboot_candidates(state)) {
            ++reboots;
            EstimationPass attempt = run_estimation(state, frame, cand.h_jn, model, cfg);
            if (attempt.confidence > best.confidence) best = attempt;
            if (attempt.confidence >= cfg.confidence_threshold) break;
        }
    }

    FrameResult res;
    res.reboot_count = reboots;
    res.confidence = best.confidence;
    res.stats = best.stats;
    res.lost = best.confidence < cfg.confidence_threshold;
    if (res.lost) {
        // carry the last confident estimate
        res.h_ref_to_cur = compose(invert(state.h_jn), state.h_in);
        res.vis = VisibilityMask(cfg.template_size, cfg.template_size, 0.0f);
    } else {
        res.h_ref_to_cur = compose(invert(best.h_jn), state.h_in);
        res.vis = best.vis;
        state.h_jn = best.h_jn;
        state.ring.push_back({state.frame_counter, best.h_jn, best.confidence});
        while (static_cast<int>(state.ring.size()) > cfg.ring_capacity) state.ring.pop_front();
    }
    res.quad = map_quad(res.h_ref_to_cur, state.ref_quad);
    return res;
}

} // namespace hvc
