#include "hvc/train.hpp"

#include <algorithm>
#include <cmath>

#include "hvc/parallel.hpp"
#include "hvc/weights_io.hpp"

namespace hvc {

ModelBundle make_bundle(const Config& cfg) {
    ModelBundle b;
    FeatureNetConfig fc{cfg.feat_base_channels, cfg.feat_out_channels};
    const int cv_channels = (2 * cfg.d_max + 1) * (2 * cfg.d_max + 1);
    HeadNetConfig hc{cv_channels, cfg.head_trunk_channels, 3};
    RefineNetConfig rc{cfg.refine_c0, cfg.refine_c1, 3};
    b.features = std::make_shared<FeatureNet>(fc);
    b.head = std::make_shared<HeadNet>(hc);
    b.head->init_zero();
    b.refine = std::make_shared<RefineNet>(rc);
    b.refine->init_zero();
    b.confidence = ConfidenceHead(kStatsPerLevel * static_cast<int>(cfg.pyramid_levels.size()),
                                  cfg.conf_hidden);
    return b;
}

void save_model(const std::string& path, const ModelBundle& bundle) {
    std::vector<TensorRef> refs;
    std::vector<double> meta_feat = {static_cast<double>(bundle.features->cfg.base_channels),
                                     static_cast<double>(bundle.features->cfg.out_channels)};
    std::vector<double> meta_head = {static_cast<double>(bundle.head->cfg.cv_channels),
                                     static_cast<double>(bundle.head->cfg.trunk_channels),
                                     static_cast<double>(bundle.head->cfg.grid)};
    std::vector<double> meta_refine = {static_cast<double>(bundle.refine->cfg.c0),
                                       static_cast<double>(bundle.refine->cfg.c1),
                                       static_cast<double>(bundle.refine->cfg.grid)};
    std::vector<double> meta_conf = {static_cast<double>(bundle.confidence.n_in),
                                     static_cast<double>(bundle.confidence.n_hidden)};
    std::vector<double> meta_flags = {bundle.has_motion ? 1.0 : 0.0,
                                      bundle.has_confidence ? 1.0 : 0.0};
    refs.push_back({"meta.feature", &meta_feat, {2}});
    refs.push_back({"meta.head", &meta_head, {3}});
    refs.push_back({"meta.refine", &meta_refine, {3}});
    refs.push_back({"meta.conf", &meta_conf, {2}});
    refs.push_back({"meta.flags", &meta_flags, {2}});
    ModelBundle& b = const_cast<ModelBundle&>(bundle);
    for (auto& r : b.features->param_refs()) refs.push_back(r);
    for (auto& r : b.head->param_refs()) refs.push_back(r);
    for (auto& r : b.refine->param_refs()) refs.push_back(r);
    std::vector<double> conf_b2 = {bundle.confidence.b2};
    for (auto& r : b.confidence.param_refs()) refs.push_back(r);
    refs.push_back({"conf.b2", &conf_b2, {1}});
    write_weights(path, refs);
}

ModelBundle load_model(const std::string& path, const Config& cfg) {
    ModelBundle b = make_bundle(cfg);
    const auto loaded = read_weights(path);
    auto find = [&](const std::string& name) -> const LoadedTensor* {
        for (const auto& t : loaded)
            if (t.name == name) return &t;
        return nullptr;
    };
    const LoadedTensor* mf = find("meta.feature");
    const LoadedTensor* mh = find("meta.head");
    const LoadedTensor* mr = find("meta.refine");
    const LoadedTensor* mc = find("meta.conf");
    const LoadedTensor* flags = find("meta.flags");
    if (!mf || !mh || !mr || !mc || !flags)
        throw WeightTopologyMismatch("model file lacks topology metadata: " + path);
    auto check = [&](bool ok, const std::string& what) {
        if (!ok)
            throw WeightTopologyMismatch("config topology does not match weights (" + what +
                                         ") in " + path);
    };
    check(static_cast<int>(mf->values[0]) == cfg.feat_base_channels &&
              static_cast<int>(mf->values[1]) == cfg.feat_out_channels,
          "feature net");
    check(static_cast<int>(mh->values[0]) == (2 * cfg.d_max + 1) * (2 * cfg.d_max + 1) &&
              static_cast<int>(mh->values[1]) == cfg.head_trunk_channels,
          "head");
    check(static_cast<int>(mr->values[0]) == cfg.refine_c0 &&
              static_cast<int>(mr->values[1]) == cfg.refine_c1,
          "refine");
    check(static_cast<int>(mc->values[0]) == b.confidence.n_in &&
              static_cast<int>(mc->values[1]) == cfg.conf_hidden,
          "confidence");

    std::vector<TensorRef> refs;
    for (auto& r : b.features->param_refs()) refs.push_back(r);
    for (auto& r : b.head->param_refs()) refs.push_back(r);
    for (auto& r : b.refine->param_refs()) refs.push_back(r);
    std::vector<double> conf_b2 = {0.0};
    for (auto& r : b.confidence.param_refs()) refs.push_back(r);
    refs.push_back({"conf.b2", &conf_b2, {1}});
    load_weights_into(path, refs);
    b.confidence.b2 = conf_b2[0];
    b.has_motion = flags->values[0] != 0.0;
    b.has_confidence = flags->values[1] != 0.0;
    return b;
}

TrackerConfig make_tracker_config(const Config& cfg) {
    TrackerConfig tc;
    tc.template_size = cfg.template_size;
    tc.pyramid_levels = cfg.pyramid_levels;
    tc.d_max = cfg.d_max;
    tc.softmax_temperature = cfg.softmax_temperature;
    tc.entropy_threshold_scale = cfg.entropy_threshold_scale;
    tc.confidence_threshold = cfg.confidence_threshold;
    tc.inner_iterations = cfg.inner_iterations;
    tc.refine_iterations = cfg.refine_iterations;
    tc.use_refinement = cfg.use_refinement;
    tc.refine_trust_region = cfg.refine_trust_region;
    tc.analytic.residual_gate = cfg.residual_gate;
    tc.analytic.peak_ratio_gate = cfg.peak_ratio_gate;
    return tc;
}

GeneratorConfig make_generator_config(const Config& cfg) {
    GeneratorConfig g;
    g.frame_size = cfg.frame_size;
    g.template_size = cfg.template_size;
    g.perturbation = cfg.perturbation;
    g.augment = cfg.augment;
    g.photo.brightness = cfg.photo_brightness;
    g.photo.contrast = cfg.photo_contrast;
    g.photo.saturation = cfg.photo_saturation;
    g.photo.blur_sigma_max = cfg.photo_blur_max;
    g.occluder_count_min = cfg.occluder_count_min;
    g.occluder_count_max = cfg.occluder_count_max;
    g.occluder_area_min = cfg.occluder_area_min;
    g.occluder_area_max = cfg.occluder_area_max;
    g.occluder_target_fraction = cfg.occluder_target_fraction;
    return g;
}

TrackerModel make_tracker_model(const Config& cfg, const ModelBundle* bundle) {
    TrackerModel m;
    if (cfg.head == "learned") {
        if (!bundle || !bundle->has_motion)
            throw WeightTopologyMismatch("head=learned requires trained motion weights");
        m.head_kind = HeadKind::Learned;
        m.feature_net = bundle->features;
        m.head = bundle->head;
        m.refine_net = bundle->refine;
    } else {
        m.head_kind = HeadKind::Analytic;
    }
    if (bundle && bundle->has_confidence) m.confidence = bundle->confidence;
    if (bundle) {
        // confidence head must match the pyramid level count
        const int want = kStatsPerLevel * static_cast<int>(cfg.pyramid_levels.size());
        if (bundle->has_confidence && m.confidence.n_in != want)
            throw WeightTopologyMismatch("confidence head expects " +
                                         std::to_string(m.confidence.n_in) + " statistics, config has " +
                                         std::to_string(want));
    }
    if (!bundle || !bundle->has_confidence)
        m.confidence =
            ConfidenceHead(kStatsPerLevel * static_cast<int>(cfg.pyramid_levels.size()),
                           cfg.conf_hidden);
    return m;
}

// ---------------------------------------------------------------------------
// Motion training.

namespace {

struct LevelPlan {
    int level;
    Homography scale_up, scale_dn; // level <-> full space
};

std::vector<LevelPlan> level_plans(const Config& cfg) {
    std::vector<LevelPlan> out;
    for (int level : cfg.pyramid_levels) {
        const double up = static_cast<double>(cfg.template_size - 1) / (level - 1);
        out.push_back({level, Homography::scaling(up, up), Homography::scaling(1.0 / up, 1.0 / up)});
    }
    return out;
}

struct SampleGradients {
    FeatureNet gfeat;
    HeadNet ghead;
    SampleLosses losses;
    SampleGradients(const FeatureNet& f, const HeadNet& h)
        : gfeat(f.grads_like()), ghead(h.grads_like()) {}
};

// Forward + backward of one sample through the teacher-forced pyramid.
// When grads is null only the losses are computed.
SampleLosses motion_sample_pass(const FeatureNet& features, const HeadNet& head,
                                const TrainingSample& s, const Config& cfg,
                                const LossWeights& lw, SampleGradients* grads) {
    const int full = cfg.template_size;
    const auto plans = level_plans(cfg);
    SampleLosses total;
    Homography h_jn = s.h_init;

    for (const auto& plan : plans) {
        const Template t_ref = sample_planar_object(s.ref_frame, s.h_gt, plan.level, full);
        const Template t_cur = sample_planar_object(s.trk_frame, h_jn, plan.level, full);

        ExtractCache cr, ct;
        const FeatureMap fr = extract_convnet_cached(t_ref, features, cr);
        const FeatureMap ft = extract_convnet_cached(t_cur, features, ct);
        const CostVolume cv = build_cost_volume(fr, ft, cfg.d_max);
        const Tensor cv_in = cost_volume_to_tensor(cv);

        HeadNet::Cache hc;
        std::vector<double> disp;
        Tensor vis_logits;
        head.forward(cv_in, disp, vis_logits, &hc);

        // ground truth at the current state
        const Homography h_s_needed_full = compose(s.h_gt, invert(h_jn));
        const Homography h_s_level =
            compose(compose(plan.scale_dn, h_s_needed_full), plan.scale_up);
        FourPointDisplacement gt_disp;
        try {
            gt_disp = homography_to_four_point(h_s_level, plan.level, plan.level);
        } catch (const PointAtInfinity&) {
            continue; // wildly divergent state; skip the level
        }
        const VisibilityMask gt_vis = gt_visibility(s.window, s.trk_frame.width(),
                                                    s.trk_frame.height(), s.occluders, h_jn,
                                                    plan.level, full);

        FourPointDisplacement pred_disp;
        for (int k = 0; k < 4; ++k) pred_disp.d[k] = Vec2(disp[2 * k], disp[2 * k + 1]);

        total.l_d += loss_homography(pred_disp, gt_disp);

        Tensor glogits;
        total.l_m += bce_with_logits(vis_logits, gt_vis, grads ? &glogits : nullptr);

        Tensor g_fr, g_ft;
        if (grads) {
            g_fr = Tensor(fr.data.h, fr.data.w, fr.data.c);
            g_ft = Tensor(ft.data.h, ft.data.w, ft.data.c);
            total.l_v += lw.lambda_v != 0.0
                             ? loss_alignment_grad(fr.data, ft.data, h_s_level, gt_vis, g_fr, g_ft)
                             : 0.0;
            for (auto& v : g_fr.data) v *= lw.lambda_v;
            for (auto& v : g_ft.data) v *= lw.lambda_v;

            const FourPointDisplacement gd = loss_homography_grad(pred_disp, gt_disp);
            std::vector<double> gdisp(8);
            for (int k = 0; k < 4; ++k) {
                gdisp[2 * k] = lw.lambda_d * gd.d[k].x;
                gdisp[2 * k + 1] = lw.lambda_d * gd.d[k].y;
            }
            for (auto& v : glogits.data) v *= lw.lambda_m;

            const Tensor g_cv_t = head.backward(hc, gdisp, glogits, grads->ghead);
            cost_volume_backward(fr, ft, cv, g_cv_t.data, g_fr, g_ft);
            extract_convnet_backward(cr, features, g_fr, grads->gfeat);
            extract_convnet_backward(ct, features, g_ft, grads->gfeat);
        } else if (lw.lambda_v != 0.0) {
            total.l_v += loss_alignment(fr, ft, h_s_level, gt_vis);
        }

        // teacher forcing: advance with the predicted increment, detached
        try {
            const Homography h_s_pred = four_point_to_homography(pred_disp, plan.level, plan.level);
            h_jn = surrogate_update(h_jn, compose(plan.scale_up, compose(h_s_pred, plan.scale_dn)));
        } catch (const DegenerateQuad&) {
            // keep the current state when the prediction is degenerate
        }
    }
    return total;
}

} // namespace

SampleLosses motion_losses(const FeatureNet& features, const HeadNet& head,
                           const TrainingSample& s, const Config& cfg) {
    return motion_sample_pass(features, head, s, cfg, LossWeights{}, nullptr);
}

void train_motion(FeatureNet& features, HeadNet& head,
                  const std::vector<const TrainingSample*>& train_set, const Config& cfg,
                  const LossWeights& weights, const ProgressFn& progress) {
    if (train_set.empty()) throw DegenerateDataset("train_motion: empty training set");
    Rng rng(cfg.seed ^ 0x5eedf00dULL);
    features.init_random(rng);
    head.init_random(rng);

    AdamConfig ac;
    ac.lr = cfg.lr;
    ac.beta1 = cfg.beta1;
    ac.beta2 = cfg.beta2;
    ac.decay_factor = cfg.lr_decay_factor;
    ac.decay_every_epochs = cfg.lr_decay_epochs;
    AdamState astate;

    auto params = [&]() {
        std::vector<TensorRef> p = features.param_refs();
        for (auto& r : head.param_refs()) p.push_back(r);
        return p;
    };

    std::vector<size_t> order(train_set.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.uniform_int(0, static_cast<int>(i) - 1)]);
        EpochStats es;
        for (size_t start = 0; start < order.size(); start += cfg.batch) {
            const size_t end = std::min(order.size(), start + cfg.batch);
            const int nb = static_cast<int>(end - start);
            std::vector<std::unique_ptr<SampleGradients>> sg(nb);
            parallel_for(0, nb, [&](int bi) {
                sg[bi] = std::make_unique<SampleGradients>(features, head);
                sg[bi]->losses = motion_sample_pass(features, head, *train_set[order[start + bi]],
                                                    cfg, weights, sg[bi].get());
            }, cfg.workers);

            FeatureNet gfeat = features.grads_like();
            HeadNet ghead = head.grads_like();
            std::vector<TensorRef> acc = gfeat.param_refs();
            for (auto& r : ghead.param_refs()) acc.push_back(r);
            const double inv = 1.0 / nb;
            for (int bi = 0; bi < nb; ++bi) {
                std::vector<TensorRef> src = sg[bi]->gfeat.param_refs();
                for (auto& r : sg[bi]->ghead.param_refs()) src.push_back(r);
                axpy_refs(inv, src, acc);
                es.loss_d += sg[bi]->losses.l_d;
                es.loss_m += sg[bi]->losses.l_m;
                es.loss_v += sg[bi]->losses.l_v;
                es.samples += 1;
            }
            adam_step(params(), acc, astate, ac, epoch);
        }
        if (progress) {
            char buf[256];
            std::snprintf(buf, sizeof(buf),
                          "motion epoch %d/%d  L_d %.4f  L_m %.4f  L_v %.4f  (%d samples)",
                          epoch + 1, cfg.epochs, es.loss_d / es.samples, es.loss_m / es.samples,
                          es.loss_v / es.samples, es.samples);
            progress(buf);
        }
    }
}

// ---------------------------------------------------------------------------
// Refinement training.

namespace {

struct RefineSampleGrads {
    RefineNet gref;
    SampleLosses losses;
    explicit RefineSampleGrads(const RefineNet& r) : gref(r.grads_like()) {}
};

SampleLosses refine_sample_pass(const RefineNet& net, const TrainingSample& s, const Config& cfg,
                                const LossWeights& lw, RefineSampleGrads* grads) {
    const int full = cfg.template_size;
    Tensor stacked(full, full, 2);
    for (int y = 0; y < full; ++y)
        for (int x = 0; x < full; ++x) {
            stacked.at(y, x, 0) = s.ref_template.image.at(x, y);
            stacked.at(y, x, 1) = s.trk_template.image.at(x, y);
        }
    RefineNet::Cache rc;
    std::vector<double> disp;
    Tensor vis_logits;
    net.forward(stacked, disp, vis_logits, &rc);

    FourPointDisplacement pred;
    for (int k = 0; k < 4; ++k) pred.d[k] = Vec2(disp[2 * k], disp[2 * k + 1]);

    SampleLosses out;
    out.l_d = loss_homography(pred, s.gt_disp);
    Tensor glogits;
    out.l_m = bce_with_logits(vis_logits, s.gt_vis[2], grads ? &glogits : nullptr);

    if (grads) {
        const FourPointDisplacement gd = loss_homography_grad(pred, s.gt_disp);
        std::vector<double> gdisp(8);
        for (int k = 0; k < 4; ++k) {
            gdisp[2 * k] = lw.lambda_d * gd.d[k].x;
            gdisp[2 * k + 1] = lw.lambda_d * gd.d[k].y;
        }
        for (auto& v : glogits.data) v *= lw.lambda_m;
        net.backward(rc, gdisp, glogits, grads->gref);
    }
    return out;
}

} // namespace

void train_refine(RefineNet& refine, const std::vector<const TrainingSample*>& train_set,
                  const Config& cfg, const LossWeights& weights, const ProgressFn& progress) {
    if (train_set.empty()) throw DegenerateDataset("train_refine: empty training set");
    Rng rng(cfg.seed ^ 0x5ef1e11eULL);
    refine.init_random(rng);

    AdamConfig ac;
    ac.lr = cfg.lr;
    ac.beta1 = cfg.beta1;
    ac.beta2 = cfg.beta2;
    ac.decay_factor = cfg.lr_decay_factor;
    ac.decay_every_epochs = cfg.lr_decay_epochs;
    AdamState astate;

    std::vector<size_t> order(train_set.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.uniform_int(0, static_cast<int>(i) - 1)]);
        EpochStats es;
        for (size_t start = 0; start < order.size(); start += cfg.batch) {
            const size_t end = std::min(order.size(), start + cfg.batch);
            const int nb = static_cast<int>(end - start);
            std::vector<std::unique_ptr<RefineSampleGrads>> sg(nb);
            parallel_for(0, nb, [&](int bi) {
                sg[bi] = std::make_unique<RefineSampleGrads>(refine);
                sg[bi]->losses = refine_sample_pass(refine, *train_set[order[start + bi]], cfg,
                                                    weights, sg[bi].get());
            }, cfg.workers);
            RefineNet gref = refine.grads_like();
            auto acc = gref.param_refs();
            const double inv = 1.0 / nb;
            for (int bi = 0; bi < nb; ++bi) {
                axpy_refs(inv, sg[bi]->gref.param_refs(), acc);
                es.loss_d += sg[bi]->losses.l_d;
                es.loss_m += sg[bi]->losses.l_m;
                es.samples += 1;
            }
            adam_step(refine.param_refs(), acc, astate, ac, epoch);
        }
        if (progress) {
            char buf[256];
            std::snprintf(buf, sizeof(buf), "refine epoch %d/%d  L_d %.4f  L_m %.4f  (%d samples)",
                          epoch + 1, cfg.epochs, es.loss_d / es.samples, es.loss_m / es.samples,
                          es.samples);
            progress(buf);
        }
    }
}

// ---------------------------------------------------------------------------

ConfidenceHead train_confidence_from_samples(const std::vector<const TrainingSample*>& samples,
                                             const TrackerModel& model, const TrackerConfig& tc,
                                             const Config& cfg, const ProgressFn& progress) {
    std::vector<ConfidenceSample> data(samples.size());
    parallel_for(0, static_cast<int>(samples.size()), [&](int i) {
        const PairEvaluation ev = evaluate_pair(*samples[i], model, tc);
        data[i].stats = ev.stats;
        data[i].label = ev.l_d <= 5.0 ? 1 : 0;
    }, cfg.workers);
    size_t pos = 0;
    for (const auto& d : data) pos += d.label;
    if (progress)
        progress("confidence set: " + std::to_string(pos) + " reliable / " +
                 std::to_string(data.size() - pos) + " unreliable");
    ConfidenceTrainConfig cc;
    cc.epochs = cfg.conf_epochs;
    cc.lr = cfg.conf_lr;
    cc.batch = cfg.batch;
    cc.seed = cfg.seed ^ 0xc0fefeULL;
    return train_confidence(data, kStatsPerLevel * static_cast<int>(cfg.pyramid_levels.size()), cc);
}

} // namespace hvc
