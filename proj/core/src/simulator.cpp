#include "xview/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <json.hpp>

#include "scoring.hpp"

namespace xview {

using nlohmann::json;

namespace {

const char* kDefaultOntologyJson = R"({
  "nodes": [
    {"id": "person", "kind": "object", "label": "person"},
    {"id": "vehicle", "kind": "object", "label": "vehicle"},
    {"id": "bicycle", "kind": "object", "label": "bicycle"},
    {"id": "head", "kind": "part", "label": "head"},
    {"id": "torso", "kind": "part", "label": "torso"},
    {"id": "legs", "kind": "part", "label": "legs"},
    {"id": "vehicle_door", "kind": "part", "label": "vehicle door"},
    {"id": "vehicle_wheel", "kind": "part", "label": "vehicle wheel"},
    {"id": "bicycle_wheel", "kind": "part", "label": "bicycle wheel"},
    {"id": "walking", "kind": "action", "label": "walking"},
    {"id": "running", "kind": "action", "label": "running"},
    {"id": "standing", "kind": "action", "label": "standing"},
    {"id": "sitting", "kind": "action", "label": "sitting"},
    {"id": "picking_up", "kind": "action", "label": "picking up"},
    {"id": "moving", "kind": "action", "label": "moving"},
    {"id": "parked", "kind": "action", "label": "parked"},
    {"id": "ridden", "kind": "action", "label": "ridden"},
    {"id": "hat", "kind": "attribute", "label": "wearing a hat"},
    {"id": "glasses", "kind": "attribute", "label": "wearing glasses"},
    {"id": "backpack", "kind": "attribute", "label": "carrying a backpack"},
    {"id": "long_sleeves", "kind": "attribute", "label": "long sleeves"},
    {"id": "shorts", "kind": "attribute", "label": "shorts"},
    {"id": "dark_colored", "kind": "attribute", "label": "dark colored"},
    {"id": "has_basket", "kind": "attribute", "label": "has a basket"}
  ],
  "edges": [
    {"src": "head", "dst": "person", "relation": "part_of"},
    {"src": "torso", "dst": "person", "relation": "part_of"},
    {"src": "legs", "dst": "person", "relation": "part_of"},
    {"src": "vehicle_door", "dst": "vehicle", "relation": "part_of"},
    {"src": "vehicle_wheel", "dst": "vehicle", "relation": "part_of"},
    {"src": "bicycle_wheel", "dst": "bicycle", "relation": "part_of"},
    {"src": "walking", "dst": "person", "relation": "can_perform"},
    {"src": "running", "dst": "person", "relation": "can_perform"},
    {"src": "standing", "dst": "person", "relation": "can_perform"},
    {"src": "sitting", "dst": "person", "relation": "can_perform"},
    {"src": "picking_up", "dst": "person", "relation": "can_perform"},
    {"src": "moving", "dst": "vehicle", "relation": "can_perform"},
    {"src": "parked", "dst": "vehicle", "relation": "can_perform"},
    {"src": "ridden", "dst": "bicycle", "relation": "can_perform"},
    {"src": "parked", "dst": "bicycle", "relation": "can_perform"},
    {"src": "standing", "dst": "sitting", "relation": "incompatible"},
    {"src": "walking", "dst": "sitting", "relation": "incompatible"},
    {"src": "running", "dst": "sitting", "relation": "incompatible"},
    {"src": "moving", "dst": "parked", "relation": "incompatible"},
    {"src": "ridden", "dst": "parked", "relation": "incompatible"},
    {"src": "hat", "dst": "person", "relation": "can_have"},
    {"src": "glasses", "dst": "person", "relation": "can_have"},
    {"src": "backpack", "dst": "person", "relation": "can_have"},
    {"src": "long_sleeves", "dst": "person", "relation": "can_have"},
    {"src": "shorts", "dst": "person", "relation": "can_have"},
    {"src": "dark_colored", "dst": "vehicle", "relation": "can_have"},
    {"src": "dark_colored", "dst": "bicycle", "relation": "can_have"},
    {"src": "has_basket", "dst": "bicycle", "relation": "can_have"}
  ]
})";

double draw_beta(std::mt19937_64& rng, double a, double b) {
  std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return x / (x + y);
}

Rect nominal_box(const std::string& type_id, Vec2 foot) {
  double w = 50.0, h = 50.0;
  if (type_id == "person") {
    w = 40.0;
    h = 110.0;
  } else if (type_id == "vehicle") {
    w = 170.0;
    h = 90.0;
  } else if (type_id == "bicycle") {
    w = 70.0;
    h = 100.0;
  }
  return {foot.x - w / 2.0, foot.y - h, foot.x + w / 2.0, foot.y};
}

double normalized_condition(const Eigen::Matrix3d& ground_to_image, double arena,
                            double width, double height) {
  Eigen::Matrix3d t_img;
  t_img << 2.0 / width, 0, -1, 0, 2.0 / height, -1, 0, 0, 1;
  Eigen::Matrix3d t_world_inv;
  t_world_inv << arena / 2.0, 0, 0, 0, arena / 2.0, 0, 0, 0, 1;
  const Eigen::Matrix3d n = t_img * ground_to_image * t_world_inv;
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(n);
  const auto& s = svd.singularValues();
  if (s(2) <= 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / s(2);
}

CameraModel draw_camera(std::mt19937_64& rng, const SceneConfig& cfg, int camera_id) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int attempt = 0; attempt < 500; ++attempt) {
    const double theta = unit(rng) * 2.0 * M_PI;
    const double base_scale =
        0.8 * std::min(cfg.image_width, cfg.image_height) / cfg.arena_size;
    const double scale = base_scale * (0.8 + 0.3 * unit(rng));
    const double cx = cfg.image_width * (0.5 + 0.06 * (unit(rng) - 0.5));
    const double cy = cfg.image_height * (0.5 + 0.06 * (unit(rng) - 0.5));
    const double p_mag = 0.15 / cfg.arena_size;
    const double p1 = p_mag * (2.0 * unit(rng) - 1.0);
    const double p2 = p_mag * (2.0 * unit(rng) - 1.0);

    Eigen::Matrix3d g2i;
    g2i << scale * std::cos(theta), -scale * std::sin(theta), cx,
        scale * std::sin(theta), scale * std::cos(theta), cy, p1, p2, 1.0;

    bool ok = true;
    const double half = cfg.arena_size / 2.0;
    for (double sx : {-1.0, 1.0}) {
      for (double sy : {-1.0, 1.0}) {
        const Eigen::Vector3d q = g2i * Eigen::Vector3d(sx * half, sy * half, 1.0);
        if (q(2) < 0.3) {
          ok = false;
          continue;
        }
        const double x = q(0) / q(2), y = q(1) / q(2);
        if (x < 0.02 * cfg.image_width || x > 0.98 * cfg.image_width ||
            y < 0.02 * cfg.image_height || y > 0.98 * cfg.image_height)
          ok = false;
      }
    }
    if (!ok) continue;
    if (normalized_condition(g2i, cfg.arena_size, cfg.image_width, cfg.image_height) > 1e3)
      continue;

    Eigen::Matrix3d i2g = g2i.inverse();
    if (std::abs(i2g(2, 2)) > 1e-9) i2g /= i2g(2, 2);
    std::array<double, 9> m{i2g(0, 0), i2g(0, 1), i2g(0, 2), i2g(1, 0), i2g(1, 1),
                            i2g(1, 2), i2g(2, 0), i2g(2, 1), i2g(2, 2)};
    CameraModel cam;
    cam.camera_id = camera_id;
    cam.width = cfg.image_width;
    cam.height = cfg.image_height;
    cam.image_to_ground = Homography(m);
    return cam;
  }
  throw InvalidConfig("could not draw a valid camera for the arena");
}

void validate_config(const SceneConfig& scene, const OntologyGraph& ontology) {
  if (scene.num_cameras < 1) throw InvalidConfig("num_cameras must be >= 1");
  if (scene.num_frames < 0) throw InvalidConfig("num_frames must be >= 0");
  if (scene.num_entities < 0) throw InvalidConfig("num_entities must be >= 0");
  if (scene.arena_size <= 0) throw InvalidConfig("arena_size must be positive");
  if (scene.feature_dim < 1) throw InvalidConfig("feature_dim must be >= 1");
  if (scene.appearance_margin < 0) throw InvalidConfig("appearance_margin must be >= 0");
  if (scene.image_width < 1 || scene.image_height < 1)
    throw InvalidConfig("image size must be positive");
  if (scene.action_dwell_min < 1 || scene.action_dwell_max < scene.action_dwell_min)
    throw InvalidConfig("action dwell bounds are malformed");
  if (scene.waypoint_interval < 1) throw InvalidConfig("waypoint_interval must be >= 1");
  if (scene.entity_types.empty()) throw InvalidConfig("entity_types must be nonempty");
  for (const auto& t : scene.entity_types) {
    const OntologyNode* n = ontology.find(t);
    if (!n || (n->kind != NodeKind::Object && n->kind != NodeKind::Part))
      throw InvalidConfig("entity type '" + t + "' is not an object in the ontology");
  }
}

void validate_noise(const NoiseModel& n) {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(n.action_flip_prob) || !prob(n.attribute_flip_prob) || !prob(n.miss_prob))
    throw InvalidConfig("noise probabilities must lie in [0,1]");
  if (n.bbox_jitter_sigma < 0 || n.appearance_sigma < 0 || n.clutter_rate < 0)
    throw InvalidConfig("noise magnitudes must be nonnegative");
  if (n.det_beta_a <= 0 || n.det_beta_b <= 0)
    throw InvalidConfig("detection beta shapes must be positive");
}

}  // namespace

const OntologyGraph& default_ontology() {
  static const OntologyGraph g = parse_ontology(kDefaultOntologyJson);
  return g;
}

SceneScript generate_scene(const SceneConfig& config, const OntologyGraph& ontology,
                           std::uint64_t seed) {
  validate_config(config, ontology);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  SceneScript script;
  script.num_cameras = config.num_cameras;
  script.num_frames = config.num_frames;
  script.arena_size = config.arena_size;
  script.feature_dim = config.feature_dim;
  script.appearance_margin = config.appearance_margin;

  for (int c = 0; c < config.num_cameras; ++c)
    script.cameras.push_back(draw_camera(rng, config, c + 1));

  // appearance means with pairwise separation >= margin
  std::vector<AppearanceFeature> means;
  for (int e = 0; e < config.num_entities; ++e) {
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      AppearanceFeature f(config.feature_dim);
      for (auto& x : f) x = std::max(1.0, config.appearance_margin) * gauss(rng);
      placed = true;
      for (const auto& m : means) {
        double d2 = 0;
        for (int i = 0; i < config.feature_dim; ++i) d2 += (f[i] - m[i]) * (f[i] - m[i]);
        if (std::sqrt(d2) < config.appearance_margin) {
          placed = false;
          break;
        }
      }
      if (placed) means.push_back(std::move(f));
    }
    if (!placed)
      throw InvalidConfig("could not place appearance means at the requested margin");
  }

  const double half = 0.45 * config.arena_size;
  for (int e = 0; e < config.num_entities; ++e) {
    SceneEntitySpec spec;
    spec.id = "e" + std::to_string(e);
    spec.type_id = config.entity_types[e % config.entity_types.size()];
    spec.true_appearance = means[e];

    // piecewise-linear trajectory through random waypoints
    Vec2 cur{half * (2 * unit(rng) - 1), half * (2 * unit(rng) - 1)};
    Vec2 next{half * (2 * unit(rng) - 1), half * (2 * unit(rng) - 1)};
    int leg = 0;
    for (int t = 0; t < config.num_frames; ++t) {
      const double w = static_cast<double>(leg) / config.waypoint_interval;
      spec.trajectory.push_back(
          {cur.x + w * (next.x - cur.x), cur.y + w * (next.y - cur.y)});
      if (++leg == config.waypoint_interval) {
        leg = 0;
        cur = next;
        next = {half * (2 * unit(rng) - 1), half * (2 * unit(rng) - 1)};
      }
    }

    const auto& legal_actions = ontology.actions_of(spec.type_id);
    if (!legal_actions.empty() && config.num_frames > 0) {
      std::uniform_int_distribution<int> dwell(config.action_dwell_min,
                                               config.action_dwell_max);
      std::uniform_int_distribution<std::size_t> pick(0, legal_actions.size() - 1);
      std::size_t current = pick(rng);
      int remaining = dwell(rng);
      for (int t = 0; t < config.num_frames; ++t) {
        spec.actions.push_back(legal_actions[current]);
        if (--remaining == 0) {
          remaining = dwell(rng);
          if (legal_actions.size() > 1) {
            std::uniform_int_distribution<std::size_t> other(0, legal_actions.size() - 2);
            std::size_t n = other(rng);
            if (n >= current) ++n;
            current = n;
          }
        }
      }
    }

    for (const auto& attr : ontology.attributes_of(spec.type_id))
      spec.attributes[attr] = (unit(rng) < 0.5);
    script.entities.push_back(std::move(spec));
  }
  return script;
}

RenderedScene render_proposals(const SceneScript& script, const NoiseModel& noise,
                               std::uint64_t seed) {
  validate_noise(noise);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const OntologyGraph& ontology = default_ontology();

  RenderedScene out;
  out.cameras = script.cameras;

  std::vector<std::string> clutter_types;
  for (const auto& e : script.entities) clutter_types.push_back(e.type_id);
  std::sort(clutter_types.begin(), clutter_types.end());
  clutter_types.erase(std::unique(clutter_types.begin(), clutter_types.end()),
                      clutter_types.end());

  for (int cam = 0; cam < script.num_cameras; ++cam) {
    const CameraModel& camera = script.cameras[cam];
    std::map<std::string, std::string> tracklet_of_entity;
    int next_id = 0;
    int clutter_id = 0;
    std::poisson_distribution<int> clutter_count(noise.clutter_rate);

    for (int t = 1; t <= script.num_frames; ++t) {
      for (const auto& entity : script.entities) {
        if (unit(rng) < noise.miss_prob) continue;
        const Vec2 ground = entity.trajectory[t - 1];
        const Vec2 foot = project_to_image(camera.image_to_ground, ground);
        const Rect clean = nominal_box(entity.type_id, foot);

        auto [it, inserted] = tracklet_of_entity.try_emplace(
            entity.id, "d" + std::to_string(next_id));
        if (inserted) ++next_id;

        ProposalRecord rec;
        rec.camera_id = camera.camera_id;
        rec.t = t;
        rec.tracklet = it->second;
        rec.type = entity.type_id;
        Rect noisy = clean;
        if (noise.bbox_jitter_sigma > 0) {
          noisy.x_min += noise.bbox_jitter_sigma * gauss(rng);
          noisy.y_min += noise.bbox_jitter_sigma * gauss(rng);
          noisy.x_max += noise.bbox_jitter_sigma * gauss(rng);
          noisy.y_max += noise.bbox_jitter_sigma * gauss(rng);
          if (noisy.x_min > noisy.x_max) std::swap(noisy.x_min, noisy.x_max);
          if (noisy.y_min > noisy.y_max) std::swap(noisy.y_min, noisy.y_max);
        }
        rec.bbox = noisy;
        rec.det = draw_beta(rng, noise.det_beta_a, noise.det_beta_b);
        rec.feat = entity.true_appearance;
        if (noise.appearance_sigma > 0)
          for (auto& x : rec.feat) x += noise.appearance_sigma * gauss(rng);

        const auto& legal_actions = ontology.actions_of(entity.type_id);
        if (!legal_actions.empty()) {
          std::string basis = entity.actions[t - 1];
          if (legal_actions.size() > 1 && unit(rng) < noise.action_flip_prob) {
            const auto cur = std::find(legal_actions.begin(), legal_actions.end(), basis) -
                             legal_actions.begin();
            std::uniform_int_distribution<std::size_t> other(0, legal_actions.size() - 2);
            std::size_t n = other(rng);
            if (n >= static_cast<std::size_t>(cur)) ++n;
            basis = legal_actions[n];
          }
          const double a = static_cast<double>(legal_actions.size());
          for (const auto& action : legal_actions)
            rec.actions.emplace_back(action, (action == basis ? 0.9 : 0.0) + 0.1 / a);
        }
        for (const auto& [attr, value] : entity.attributes) {
          bool v = value;
          if (unit(rng) < noise.attribute_flip_prob) v = !v;
          rec.attrs.emplace_back(attr, v ? 0.95 : 0.05);
        }
        out.records.push_back(std::move(rec));

        HierarchyRow row;
        row.scene_id = entity.id;
        row.camera = camera.camera_id;
        row.view_id = it->second;
        row.t = t;
        if (!entity.actions.empty()) row.action = entity.actions[t - 1];
        row.attributes = entity.attributes;
        row.world_xy = ground;
        row.bbox = clean;
        out.ground_truth.push_back(std::move(row));
      }

      if (noise.clutter_rate > 0 && !clutter_types.empty()) {
        const int n_clutter = clutter_count(rng);
        for (int j = 0; j < n_clutter; ++j) {
          const std::string& type =
              clutter_types[static_cast<std::size_t>(unit(rng) * clutter_types.size()) %
                            clutter_types.size()];
          const double half = 0.45 * script.arena_size;
          const Vec2 ground{half * (2 * unit(rng) - 1), half * (2 * unit(rng) - 1)};
          const Vec2 foot = project_to_image(camera.image_to_ground, ground);

          ProposalRecord rec;
          rec.camera_id = camera.camera_id;
          rec.t = t;
          rec.tracklet = "x" + std::to_string(clutter_id++);
          rec.type = type;
          rec.bbox = nominal_box(type, foot);
          rec.det = draw_beta(rng, noise.det_beta_b, noise.det_beta_a);
          rec.feat.resize(script.feature_dim);
          for (auto& x : rec.feat)
            x = std::max(1.0, script.appearance_margin) * gauss(rng);
          const auto& legal_actions = ontology.actions_of(type);
          if (!legal_actions.empty()) {
            const std::size_t basis =
                static_cast<std::size_t>(unit(rng) * legal_actions.size()) %
                legal_actions.size();
            const double a = static_cast<double>(legal_actions.size());
            for (std::size_t i = 0; i < legal_actions.size(); ++i)
              rec.actions.emplace_back(legal_actions[i],
                                       (i == basis ? 0.9 : 0.0) + 0.1 / a);
          }
          for (const auto& attr : ontology.attributes_of(type))
            rec.attrs.emplace_back(attr, 0.05 + 0.9 * unit(rng));
          out.records.push_back(std::move(rec));
        }
      }
    }
  }
  return out;
}

std::vector<TrackHistory> script_histories(const SceneScript& script) {
  std::vector<TrackHistory> out;
  for (const auto& entity : script.entities) {
    if (script.num_frames == 0) continue;
    TrackHistory h;
    h.type_id = entity.type_id;
    h.first_t = 1;
    for (int t = 0; t < script.num_frames; ++t) {
      h.actions.push_back(entity.actions.empty()
                              ? std::nullopt
                              : std::optional<std::string>(entity.actions[t]));
      h.attributes.push_back(entity.attributes);
    }
    out.push_back(std::move(h));
  }
  return out;
}

namespace {

void read_fields(const json& j, const std::string& where,
                 const std::map<std::string, std::function<void(const json&)>>& fields) {
  if (!j.is_object()) throw InvalidConfig(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    auto f = fields.find(it.key());
    if (f == fields.end())
      throw InvalidConfig(where + ": unknown field '" + it.key() + "'");
    try {
      f->second(it.value());
    } catch (const json::exception& e) {
      throw InvalidConfig(where + ": field '" + it.key() + "': " + e.what());
    }
  }
}

}  // namespace

SimulationConfig parse_simulation_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw MalformedDocument(std::string("simulation config: ") + e.what());
  }
  SimulationConfig cfg;
  if (!doc.is_object()) throw InvalidConfig("simulation config must be an object");
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (it.key() == "scene") {
      SceneConfig& s = cfg.scene;
      read_fields(it.value(), "scene",
                  {{"num_cameras", [&](const json& v) { s.num_cameras = v.get<int>(); }},
                   {"num_frames", [&](const json& v) { s.num_frames = v.get<int>(); }},
                   {"num_entities", [&](const json& v) { s.num_entities = v.get<int>(); }},
                   {"arena_size", [&](const json& v) { s.arena_size = v.get<double>(); }},
                   {"feature_dim", [&](const json& v) { s.feature_dim = v.get<int>(); }},
                   {"appearance_margin",
                    [&](const json& v) { s.appearance_margin = v.get<double>(); }},
                   {"image_width", [&](const json& v) { s.image_width = v.get<int>(); }},
                   {"image_height", [&](const json& v) { s.image_height = v.get<int>(); }},
                   {"action_dwell_min",
                    [&](const json& v) { s.action_dwell_min = v.get<int>(); }},
                   {"action_dwell_max",
                    [&](const json& v) { s.action_dwell_max = v.get<int>(); }},
                   {"waypoint_interval",
                    [&](const json& v) { s.waypoint_interval = v.get<int>(); }},
                   {"entity_types", [&](const json& v) {
                      s.entity_types = v.get<std::vector<std::string>>();
                    }}});
    } else if (it.key() == "noise") {
      NoiseModel& n = cfg.noise;
      read_fields(it.value(), "noise",
                  {{"bbox_jitter_sigma",
                    [&](const json& v) { n.bbox_jitter_sigma = v.get<double>(); }},
                   {"appearance_sigma",
                    [&](const json& v) { n.appearance_sigma = v.get<double>(); }},
                   {"action_flip_prob",
                    [&](const json& v) { n.action_flip_prob = v.get<double>(); }},
                   {"attribute_flip_prob",
                    [&](const json& v) { n.attribute_flip_prob = v.get<double>(); }},
                   {"miss_prob", [&](const json& v) { n.miss_prob = v.get<double>(); }},
                   {"det_beta_a", [&](const json& v) { n.det_beta_a = v.get<double>(); }},
                   {"det_beta_b", [&](const json& v) { n.det_beta_b = v.get<double>(); }},
                   {"clutter_rate",
                    [&](const json& v) { n.clutter_rate = v.get<double>(); }}});
    } else {
      throw InvalidConfig("simulation config: unknown section '" + it.key() + "'");
    }
  }
  return cfg;
}

SimulationConfig load_simulation_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MalformedDocument("cannot open config file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_simulation_config(buf.str());
}

std::string serialize_simulation_config(const SimulationConfig& config) {
  json j;
  j["scene"] = {{"num_cameras", config.scene.num_cameras},
                {"num_frames", config.scene.num_frames},
                {"num_entities", config.scene.num_entities},
                {"arena_size", config.scene.arena_size},
                {"feature_dim", config.scene.feature_dim},
                {"appearance_margin", config.scene.appearance_margin},
                {"image_width", config.scene.image_width},
                {"image_height", config.scene.image_height},
                {"action_dwell_min", config.scene.action_dwell_min},
                {"action_dwell_max", config.scene.action_dwell_max},
                {"waypoint_interval", config.scene.waypoint_interval},
                {"entity_types", config.scene.entity_types}};
  j["noise"] = {{"bbox_jitter_sigma", config.noise.bbox_jitter_sigma},
                {"appearance_sigma", config.noise.appearance_sigma},
                {"action_flip_prob", config.noise.action_flip_prob},
                {"attribute_flip_prob", config.noise.attribute_flip_prob},
                {"miss_prob", config.noise.miss_prob},
                {"det_beta_a", config.noise.det_beta_a},
                {"det_beta_b", config.noise.det_beta_b},
                {"clutter_rate", config.noise.clutter_rate}};
  return j.dump(2) + "\n";
}

std::string partition_key(const std::vector<std::vector<int>>& blocks) {
  std::vector<std::string> parts;
  for (const auto& block : blocks) {
    std::string b;
    for (std::size_t i = 0; i < block.size(); ++i) {
      if (i) b += ',';
      b += std::to_string(block[i]);
    }
    parts.push_back(std::move(b));
  }
  std::sort(parts.begin(), parts.end());
  std::string key;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) key += '|';
    key += parts[i];
  }
  return key;
}

namespace {

struct BlockEval {
  double score = 0.0;
  int first_t = 0;
  std::string type_id;
};

class PartitionEnumerator {
 public:
  PartitionEnumerator(const Hierarchy& h, const scoring::TrackScorer& scorer)
      : h_(h), scorer_(scorer), words_(h.tracklets().words_per_mask()) {}

  void run(const std::function<void(const std::vector<std::vector<int>>&,
                                    const std::vector<const BlockEval*>&)>& cb) {
    callback_ = &cb;
    recurse(0);
  }

 private:
  const BlockEval& eval_block(const std::vector<int>& block) {
    auto it = cache_.find(block);
    if (it != cache_.end()) return it->second;
    scoring::TrackEval ev = scorer_.evaluate(block);
    BlockEval be{ev.score, ev.track.first_t, ev.track.type_id};
    return cache_.emplace(block, std::move(be)).first->second;
  }

  bool fits(const std::vector<int>& block, int tracklet) const {
    const TrackletTable& table = h_.tracklets();
    const Tracklet& tr = table.at(tracklet);
    for (int member : block) {
      const Tracklet& m = table.at(member);
      if (m.type_id != tr.type_id) return false;
      if (m.camera_index != tr.camera_index) continue;
      for (int w = 0; w < words_; ++w)
        if (m.frame_mask[w] & tr.frame_mask[w]) return false;
    }
    return true;
  }

  void recurse(int i) {
    if (i == h_.tracklets().size()) {
      std::vector<const BlockEval*> evals;
      evals.reserve(blocks_.size());
      for (const auto& b : blocks_) evals.push_back(&eval_block(b));
      (*callback_)(blocks_, evals);
      return;
    }
    for (auto& block : blocks_) {
      if (!fits(block, i)) continue;
      block.push_back(i);
      recurse(i + 1);
      block.pop_back();
    }
    blocks_.push_back({i});
    recurse(i + 1);
    blocks_.pop_back();
  }

  const Hierarchy& h_;
  const scoring::TrackScorer& scorer_;
  int words_;
  std::vector<std::vector<int>> blocks_;
  std::map<std::vector<int>, BlockEval> cache_;
  const std::function<void(const std::vector<std::vector<int>>&,
                           const std::vector<const BlockEval*>&)>* callback_ = nullptr;
};

}  // namespace

std::vector<ScoredPartition> enumerate_structures(const Hierarchy& initial,
                                                  const EnergyWeights& weights,
                                                  const PriorModel& prior,
                                                  int max_tracklets) {
  if (initial.tracklets().size() > max_tracklets)
    throw TooLarge("structure space over " + std::to_string(initial.tracklets().size()) +
                   " tracklets exceeds the limit of " + std::to_string(max_tracklets));
  scoring::Context ctx(initial.ontology(), initial.evidence(), weights, prior);
  scoring::TrackScorer scorer(ctx, initial);

  std::vector<ScoredPartition> out;
  PartitionEnumerator enumerator(initial, scorer);
  enumerator.run([&](const std::vector<std::vector<int>>& blocks,
                     const std::vector<const BlockEval*>& evals) {
    ScoredPartition p;
    p.blocks = blocks;
    p.key = partition_key(blocks);
    std::vector<std::string> alive;
    double score = 0.0;
    for (const BlockEval* e : evals) {
      score += e->score;
      if (e->first_t == 1) alive.push_back(e->type_id);
    }
    std::sort(alive.begin(), alive.end());
    score += prior.initial_logprob(alive);
    p.log_posterior = score;
    out.push_back(std::move(p));
  });
  return out;
}

BruteForceResult brute_force_map(const OntologyGraph& ontology, const Evidence& evidence,
                                 const EnergyWeights& weights, const PriorModel& prior,
                                 double det_threshold, int max_tracklets) {
  Hierarchy h = Hierarchy::initial(ontology, evidence,
                                   initial_view_graphs(evidence, ontology, det_threshold));
  std::vector<ScoredPartition> all = enumerate_structures(h, weights, prior, max_tracklets);

  BruteForceResult result;
  result.num_partitions = static_cast<long>(all.size());
  const ScoredPartition* best = nullptr;
  for (const auto& p : all)
    if (!best || p.log_posterior > best->log_posterior) best = &p;
  if (!best) {
    result.hierarchy = std::move(h);
    result.log_posterior = log_posterior(result.hierarchy, evidence, weights, prior);
    return result;
  }

  // materialize the winner with exact value inference
  scoring::Context ctx(ontology, evidence, weights, prior);
  scoring::TrackScorer scorer(ctx, h);
  std::vector<int> remove;
  std::vector<SceneTrack> add;
  std::vector<std::vector<scoring::ViewAttrWrite>> writes;
  for (int k = 0; k < static_cast<int>(h.tracks().size()); ++k) remove.push_back(k);
  for (const auto& block : best->blocks) {
    scoring::TrackEval ev = scorer.evaluate(block);
    add.push_back(std::move(ev.track));
    writes.push_back(std::move(ev.view_attr_writes));
  }
  h.replace_tracks(std::move(remove), std::move(add));
  for (const auto& ws : writes)
    for (const auto& w : ws)
      h.view_entity(w.tracklet, w.obs_pos).attributes[w.attr_id] = w.value;

  result.log_posterior = log_posterior(h, evidence, weights, prior);
  result.hierarchy = std::move(h);
  return result;
}

}  // namespace xview
