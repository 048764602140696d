#include "semray/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace semray {

namespace fs = std::filesystem;

namespace {

struct RepName {
  Representation rep;
  const char* name;
};

constexpr RepName kRepNames[] = {
    {Representation::RayFronts, "rayfronts"},
    {Representation::SemPoses, "sem_poses"},
    {Representation::SemVoxels, "sem_voxels"},
    {Representation::SphericalFronts, "spherical_fronts"},
    {Representation::UnidirectionalFronts, "unidirectional_fronts"},
};

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double lapMs() {
    const auto now = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(now - start_).count();
    start_ = now;
    return ms;
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

Representation parse_representation(const std::string& name) {
  for (const auto& r : kRepNames) {
    if (name == r.name) return r.rep;
  }
  throw std::invalid_argument("unknown representation '" + name + "'");
}

const char* to_string(Representation r) {
  for (const auto& n : kRepNames) {
    if (n.rep == r) return n.name;
  }
  return "?";
}

const std::vector<Representation>& all_representations() {
  static const std::vector<Representation> reps = {Representation::RayFronts, Representation::SemPoses,
                                                   Representation::SemVoxels, Representation::SphericalFronts,
                                                   Representation::UnidirectionalFronts};
  return reps;
}

ClassifyParams classify_params(const PipelineConfig& cfg) {
  return {cfg.prediction_thresh, cfg.prompt_denoising_thresh, cfg.logit_scale};
}

Mapper::Mapper(const PipelineConfig& cfg, Representation rep)
    : cfg_(cfg), rep_(rep), occ_(cfg.vox_size, {cfg.max_empty_cnt, cfg.max_occ_cnt}) {
  cfg_.validate();
  ray_buffer_.period = cfg_.ray_accum_period;
  ray_buffer_.phase = cfg_.ray_accum_phase;
  frontiers_.fine_resolution = cfg_.vox_size;
  frontiers_.factor = cfg_.fronti_subsampling;
  fronts_.variant = rep == Representation::UnidirectionalFronts ? SemFrontVariant::Unidirectional
                                                                 : SemFrontVariant::Spherical;
}

bool Mapper::usesVoxels() const { return rep_ != Representation::SemPoses; }
bool Mapper::usesRays() const { return rep_ == Representation::RayFronts; }
bool Mapper::usesFronts() const {
  return rep_ == Representation::SphericalFronts || rep_ == Representation::UnidirectionalFronts;
}

QuerySet Mapper::projectQueries(const QuerySet& q) const {
  if (!compressor_) return q;
  QuerySet out;
  for (const auto& l : q.labels) out.labels.push_back({l.name, compress(*compressor_, l.embedding)});
  out.normalize();
  return out;
}

StageTimings Mapper::process(const FrameRecord& frame, std::size_t step) {
  StageTimings t;
  Stopwatch total, lap;
  std::string stage = "input";
  try {
    frame.intrinsics.validate();
    frame.depth.validate();
    frame.features.validate();
    if (frame.depth.height != frame.intrinsics.height || frame.depth.width != frame.intrinsics.width ||
        frame.features.height != frame.depth.height || frame.features.width != frame.depth.width) {
      throw std::invalid_argument("image sizes disagree with each other or the intrinsics");
    }
    std::seed_seq seq{cfg_.seed, static_cast<std::uint64_t>(step)};
    std::mt19937_64 rng(seq);

    stage = "features";
    const FeatureImage* feats = &frame.features;
    FeatureImage compressed;
    if (dim_ == 0) {
      if (frame.features.dim > cfg_.stored_feat_dim) {
        const std::size_t n = static_cast<std::size_t>(frame.features.height) * frame.features.width;
        const auto picked = uniform_subsample(n, 4096, rng);
        std::vector<std::vector<float>> samples;
        samples.reserve(picked.size());
        for (std::size_t i : picked) {
          const auto px = frame.features.pixel(i);
          samples.emplace_back(px.begin(), px.end());
        }
        compressor_ = fit_compressor(samples, cfg_.stored_feat_dim);
        dim_ = cfg_.stored_feat_dim;
      } else {
        dim_ = frame.features.dim;
      }
      if (usesVoxels()) {
        voxels_.emplace(cfg_.vox_size, dim_);
        voxel_buffer_.emplace(dim_, cfg_.vox_accum_period);
      }
      if (usesRays()) rays_.emplace(cfg_.angle_bin_size, dim_);
    }
    if (compressor_) {
      if (frame.features.dim != compressor_->inputDim()) throw std::invalid_argument("feature dimension changed");
      compressed = compress_image(*compressor_, frame.features);
      feats = &compressed;
    } else if (frame.features.dim != dim_) {
      throw std::invalid_argument("feature dimension changed");
    }
    t.semantic += lap.lapMs();

    stage = "semantic";
    if (rep_ == Representation::SemPoses) sem_poses_update(poses_, frame.pose, *feats);
    if (voxels_ && depthSensing()) {
      accumulate_frame(*voxel_buffer_, frame.pose, frame.intrinsics, frame.depth, *feats, cfg_.vox_size,
                       cfg_.occ_thickness, cfg_.max_pts_per_frame, rng);
      if ((step + 1) % static_cast<std::size_t>(cfg_.vox_accum_period) == 0) {
        voxels_->fuse(*voxel_buffer_);
        voxel_buffer_->clear();
      }
    }
    t.semantic += lap.lapMs();

    stage = "occupancy";
    if (depthSensing()) {
      OccupancyIntegrationParams p;
      p.occ_thickness = cfg_.occ_thickness;
      p.occ_observ_weight = cfg_.occ_observ_weight;
      p.max_pts = cfg_.max_pts_per_frame;
      p.max_empty_pts = cfg_.max_empty_pts_per_frame;
      integrate_depth_frame(occ_, frame.pose, frame.intrinsics, frame.depth, p, rng);
    }
    t.occupancy = lap.lapMs();

    stage = "frontiers";
    if ((usesRays() || usesFronts()) && depthSensing()) {
      const FrontierThresholds th{cfg_.fronti_neighborhood_r, cfg_.fronti_min_unobserved, cfg_.fronti_min_occupied,
                                  cfg_.fronti_min_empty};
      const auto fine = compute_fine_frontiers(occ_, th);
      FrontierSet next = subsample_frontiers(fine, cfg_.vox_size, cfg_.fronti_subsampling,
                                             cfg_.fronti_subsampling_min_fronti, ++generation_);
      const FrontierDiff diff = diff_frontiers(frontiers_, next);
      if (rays_) propagate_fronts(*rays_, diff.removed, ray_buffer_, cfg_.ray_tracing);
      if (usesFronts()) {
        sem_fronts_prune(fronts_, diff.removed);
        sem_fronts_refresh_directions(fronts_, occ_);
      }
      frontiers_ = std::move(next);
    }
    t.frontiers = lap.lapMs();

    stage = "rays";
    if (usesRays() || usesFronts()) {
      const double max_range = depthSensing() ? cfg_.depth_range : 0.0;
      auto observed = observe_out_of_range(frame.pose, frame.intrinsics, frame.depth, *feats, cfg_.ray_erosion,
                                           cfg_.max_dirs_per_frame, rng, max_range);
      ray_buffer_.pending.insert(ray_buffer_.pending.end(), std::make_move_iterator(observed.begin()),
                                 std::make_move_iterator(observed.end()));
      if (ray_buffer_.flushDue(step)) castPending();
    }
    t.rays = lap.lapMs();

    stage = "pruning";
    if (voxels_ && (step + 1) % static_cast<std::size_t>(cfg_.sem_pruning_period) == 0) {
      voxels_->pruneWithOccupancy(occ_);
    }
    if ((step + 1) % static_cast<std::size_t>(cfg_.occ_pruning_period) == 0) occ_.pruneMerge(cfg_.occ_pruning_tolerance);
    t.pruning = lap.lapMs();
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(frame.index, stage, e.what());
  }
  t.total = total.lapMs();
  return t;
}

void Mapper::castPending() {
  auto& pending = ray_buffer_.pending;
  if (pending.empty()) return;
  if (!depthSensing()) {
    if (rays_) accumulate_pose_anchored(*rays_, pending, frontiers_.beta());
  } else if (!frontiers_.empty()) {
    AssociationParams p;
    p.depth_range = cfg_.depth_range;
    p.ray_tracing = cfg_.ray_tracing;
    p.threads = cfg_.threads;
    if (rays_) {
      const auto results = associate_rays(pending, frontiers_, p, &occ_);
      bin_and_accumulate(*rays_, pending, results, frontiers_);
    }
    if (usesFronts()) sem_fronts_update(fronts_, pending, frontiers_, p, occ_);
  }
  pending.clear();
}

void Mapper::flush() {
  if (voxels_ && voxel_buffer_ && !voxel_buffer_->empty()) {
    voxels_->fuse(*voxel_buffer_);
    voxel_buffer_->clear();
  }
  castPending();
}

std::vector<LabeledPoint> labeled_voxels(const Mapper& mapper, const QuerySet& queries, const ClassifyParams& params) {
  std::vector<LabeledPoint> out;
  const SemanticVoxelMap* map = mapper.voxels();
  if (map == nullptr || map->empty()) return out;
  const auto keys = map->sortedKeys();
  std::vector<std::vector<float>> features;
  features.reserve(keys.size());
  for (const auto& k : keys) features.push_back(map->find(k)->feature);
  const auto labels = classify(features, mapper.projectQueries(queries), params);
  out.reserve(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) out.push_back({voxel_center(keys[i], map->resolution()), labels[i]});
  return out;
}

std::vector<ClassScores> evaluate_search(const Mapper& mapper, const GroundTruth& gt, const QuerySet& queries) {
  const PipelineConfig& cfg = mapper.config();
  const EvalGrid& grid = gt.grid();
  const MappedMask mapped = compute_mapped_mask(mapper.occupancy(), grid);
  const ClassifyParams params = classify_params(cfg);

  // Evidence entries: rays (origin, direction) or frontier indices, each with a feature.
  std::vector<std::vector<float>> features;
  std::vector<RayEvidence> rays;
  std::vector<std::size_t> fronts;
  switch (mapper.representation()) {
    case Representation::RayFronts:
      if (mapper.rays() != nullptr) {
        for (const auto& [key, e] : mapper.rays()->entries()) {
          features.push_back(e.feature);
          rays.push_back({e.origin, bin_center_direction(e.bin, mapper.rays()->psi())});
        }
      }
      break;
    case Representation::SemPoses:
      for (const auto& e : mapper.semPoses().entries) {
        features.push_back(e.feature);
        rays.push_back({e.origin, e.dir});
      }
      break;
    case Representation::SphericalFronts:
      for (const auto& [key, e] : mapper.semFronts().entries) {
        const auto idx = mapper.frontiers().indexOf(key);
        if (idx < 0) continue;
        features.push_back(e.feature);
        fronts.push_back(static_cast<std::size_t>(idx));
      }
      break;
    case Representation::UnidirectionalFronts:
      for (const auto& [key, e] : mapper.semFronts().entries) {
        features.push_back(e.feature);
        rays.push_back({e.origin, e.dir.value_or(Vec3::UnitZ())});
      }
      break;
    case Representation::SemVoxels:
      break;
  }
  std::vector<int> labels;
  if (!features.empty()) labels = classify(features, mapper.projectQueries(queries), params);

  std::vector<ClassScores> out;
  for (int cls : gt.classes()) {
    ClassScores cs;
    cs.cls = cls;
    cs.mapped_fraction = mapped_fraction(gt, cls, mapped);
    if (mapper.representation() == Representation::SemVoxels) {
      // Nothing beyond the mapped region: no cut, nothing excluded.
      cs.search = {0.0, 1.0, 0.0};
      out.push_back(cs);
      continue;
    }
    std::vector<RayEvidence> cls_rays;
    std::vector<std::size_t> cls_fronts;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != cls) continue;
      if (mapper.representation() == Representation::SphericalFronts) {
        cls_fronts.push_back(fronts[i]);
      } else {
        cls_rays.push_back(rays[i]);
      }
    }
    SearchVolumeGrid volume;
    if (!cls_rays.empty()) {
      volume = build_search_volume_rays(cls_rays, cfg.coneHalfAngle(), grid, mapped, cfg.searchvol_thresh);
    } else if (!cls_fronts.empty()) {
      volume = build_search_volume_spherical(cls_fronts, mapper.frontiers(), grid, mapped, cfg.searchvol_thresh);
    } else {
      volume = search_volume_unconstrained(grid, mapped);
    }
    cs.search = search_scores(volume, gt, cls, mapped);
    out.push_back(cs);
  }
  return out;
}

double RunReport::totalMs() const {
  double s = 0.0;
  for (const auto& f : frames) s += f.total;
  return s;
}

RunReport run_mapping(const fs::path& scene, const PipelineConfig& cfg, const fs::path& out_dir) {
  FrameStream stream(scene);
  Mapper mapper(cfg, parse_representation(cfg.representation));
  RunReport report;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    FrameRecord frame;
    try {
      frame = stream.read(i);
    } catch (const DatasetError& e) {
      throw PipelineError(stream.indices()[i], "load", e.what());
    }
    report.frames.push_back(mapper.process(frame, i));
  }
  mapper.flush();

  fs::create_directories(out_dir);
  std::vector<int> labels;
  if (mapper.voxels() != nullptr && fs::exists(scene / "queries.bin")) {
    const QuerySet q = read_queries(scene / "queries.bin");
    for (const auto& p : labeled_voxels(mapper, q, classify_params(cfg))) labels.push_back(p.label);
  }
  const fs::path ply = out_dir / "voxels.ply";
  if (mapper.voxels() != nullptr) {
    export_point_cloud(*mapper.voxels(), ply, labels);
  } else {
    export_point_cloud(SemanticVoxelMap(cfg.vox_size, 1), ply);
  }
  const fs::path rays = out_dir / "rays.txt";
  {
    std::ofstream out(rays);
    if (mapper.rays() != nullptr) mapper.rays()->dump(out);
    for (const auto& [key, e] : mapper.semFronts().entries) {
      out << e.origin.x() << ' ' << e.origin.y() << ' ' << e.origin.z() << ' ' << e.weight << '\n';
    }
    for (const auto& e : mapper.semPoses().entries) {
      out << e.origin.x() << ' ' << e.origin.y() << ' ' << e.origin.z() << ' ' << e.dir.x() << ' ' << e.dir.y()
          << ' ' << e.dir.z() << '\n';
    }
  }
  const fs::path occ = out_dir / "occupancy.txt";
  {
    std::ofstream out(occ);
    mapper.occupancy().dump(out);
  }
  const fs::path timings = out_dir / "timings.csv";
  {
    std::ofstream out(timings);
    out << "frame,semantic_ms,occupancy_ms,frontiers_ms,rays_ms,pruning_ms,total_ms\n";
    for (std::size_t i = 0; i < report.frames.size(); ++i) {
      const auto& f = report.frames[i];
      out << i << ',' << fmt_double(f.semantic) << ',' << fmt_double(f.occupancy) << ',' << fmt_double(f.frontiers)
          << ',' << fmt_double(f.rays) << ',' << fmt_double(f.pruning) << ',' << fmt_double(f.total) << '\n';
    }
  }
  report.semantic_voxels = mapper.voxels() ? mapper.voxels()->size() : 0;
  report.ray_entries = mapper.rays() ? mapper.rays()->size() : mapper.semFronts().entries.size();
  report.occupancy_cells = mapper.occupancy().cellCount();
  report.occupancy_regions = mapper.occupancy().regionCount();
  report.frontiers = mapper.frontiers().size();
  report.outputs = {ply, rays, occ, timings};
  return report;
}

std::vector<RepresentationResult> online_benchmark(const std::vector<FrameRecord>& frames, const GroundTruth& gt,
                                                   const QuerySet& queries, const PipelineConfig& cfg,
                                                   const std::vector<Representation>& reps) {
  queries.validate();
  std::vector<RepresentationResult> results;
  const std::size_t period = static_cast<std::size_t>(cfg.evalPeriod());
  for (Representation rep : reps) {
    RepresentationResult r;
    r.rep = rep;
    Mapper mapper(cfg, rep);
    for (std::size_t i = 0; i < frames.size(); ++i) {
      mapper.process(frames[i], i);
      if ((i + 1) % period != 0 && i + 1 != frames.size()) continue;
      const double t = static_cast<double>(i);
      for (const auto& cs : evaluate_search(mapper, gt, queries)) {
        ClassSeries& s = r.series.classes[cs.cls];
        s.cls = cs.cls;
        s.t.push_back(t);
        s.scv.push_back(cs.search.scv);
        s.recall.push_back(cs.search.recall);
        s.scvr.push_back(cs.search.scvr);
        s.mapped_fraction.push_back(cs.mapped_fraction);
      }
      const auto voxels = labeled_voxels(mapper, queries, classify_params(cfg));
      r.series.t.push_back(t);
      r.series.miou.push_back(segmentation_metrics(voxels, gt, cfg.knn_k).miou);
    }
    double sum = 0.0;
    for (const auto& [cls, s] : r.series.classes) {
      const double auc = scvr_auc(s);
      r.scvr_auc[cls] = auc;
      sum += auc;
    }
    r.mean_scvr_auc = r.scvr_auc.empty() ? 0.0 : sum / static_cast<double>(r.scvr_auc.size());
    r.miou_auc = r.series.t.empty() ? 0.0 : miou_time_auc(r.series.t, r.series.miou);
    results.push_back(std::move(r));
  }
  return results;
}

std::vector<fs::path> write_online_csv(const std::vector<RepresentationResult>& results, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::vector<fs::path> paths;
  for (const auto& r : results) {
    const fs::path path = out_dir / (std::string(to_string(r.rep)) + "_metrics.csv");
    std::ofstream out(path);
    out << "timestep,class,scv,recall,scvr,miou,mapped_fraction\n";
    for (std::size_t j = 0; j < r.series.t.size(); ++j) {
      for (const auto& [cls, s] : r.series.classes) {
        out << fmt_double(s.t[j]) << ',' << cls << ',' << fmt_double(s.scv[j]) << ',' << fmt_double(s.recall[j]) << ','
            << fmt_double(s.scvr[j]) << ',' << fmt_double(r.series.miou[j]) << ',' << fmt_double(s.mapped_fraction[j])
            << '\n';
      }
    }
    for (const auto& [cls, auc] : r.scvr_auc) {
      out << "auc," << cls << ",,," << fmt_double(auc) << ',' << fmt_double(r.miou_auc) << ",\n";
    }
    if (!out) throw std::runtime_error("failed writing " + path.string());
    paths.push_back(path);
  }
  const fs::path summary = out_dir / "summary.csv";
  std::ofstream out(summary);
  out << "representation,scvr_auc,miou_auc\n";
  for (const auto& r : results) {
    out << to_string(r.rep) << ',' << fmt_double(r.mean_scvr_auc) << ',' << fmt_double(r.miou_auc) << '\n';
  }
  paths.push_back(summary);
  return paths;
}

std::vector<RepresentationResult> run_online_benchmark(const fs::path& scene, const PipelineConfig& cfg,
                                                       const std::vector<Representation>& reps, const fs::path& out_dir) {
  const auto frames = read_frame_stream(scene);
  const GroundTruth gt = read_ground_truth(scene / "gt.bin");
  const QuerySet queries = read_queries(scene / "queries.bin");
  auto results = online_benchmark(frames, gt, queries, cfg, reps);
  write_online_csv(results, out_dir);
  return results;
}

OfflineResult offline_eval(const std::vector<FrameRecord>& frames, const GroundTruth& gt, const QuerySet& queries,
                           const PipelineConfig& cfg) {
  OfflineResult r;
  r.k = cfg.knn_k;
  r.frame_skip = cfg.frame_skip;
  Mapper mapper(cfg, Representation::SemVoxels);
  std::size_t step = 0;
  for (std::size_t i = static_cast<std::size_t>(cfg.frame_skip) - 1; i < frames.size();
       i += static_cast<std::size_t>(cfg.frame_skip)) {
    mapper.process(frames[i], step++);
  }
  mapper.flush();
  r.frames_used = step;
  const auto voxels = labeled_voxels(mapper, queries, classify_params(cfg));
  r.voxels = voxels.size();
  r.scores = segmentation_metrics(voxels, gt, cfg.knn_k);
  return r;
}

OfflineResult run_offline_eval(const fs::path& scene, const PipelineConfig& cfg, const fs::path& out_dir) {
  const auto frames = read_frame_stream(scene);
  const GroundTruth gt = read_ground_truth(scene / "gt.bin");
  const QuerySet queries = read_queries(scene / "queries.bin");
  const OfflineResult r = offline_eval(frames, gt, queries, cfg);
  fs::create_directories(out_dir);
  std::ofstream out(out_dir / "offline_metrics.csv");
  out << "miou,fmiou,acc,k,frame_skip,frames_used,voxels\n";
  out << fmt_double(r.scores.miou) << ',' << fmt_double(r.scores.fmiou) << ',' << fmt_double(r.scores.acc) << ','
      << r.k << ',' << r.frame_skip << ',' << r.frames_used << ',' << r.voxels << '\n';
  return r;
}

}  // namespace semray
