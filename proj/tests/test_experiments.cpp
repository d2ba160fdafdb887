#include "cosserat/errors.hpp"
#include "cosserat/experiments.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace cosserat;

namespace {

ScenarioConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

std::vector<std::vector<double>> read_csv(std::istream& in, std::string* header) {
  std::string line;
  std::getline(in, line);
  if (header) *header = line;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream fields(line);
    std::string field;
    while (std::getline(fields, field, ',')) row.push_back(std::strtod(field.c_str(), nullptr));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Frame frame_of(const RodState& state, double t) {
  return {t, state.x, state.y, state.theta, std::nullopt, 0};
}

}  // namespace

TEST_CASE("defaults match the rod and task parameters") {
  const ScenarioConfig a = ScenarioConfig::defaults(Scenario::reach_multi, Profile::paper);
  CHECK(a.rod.length == 0.20);
  CHECK(a.rod.diameter_base == 0.02);
  CHECK(a.rod.diameter_tip == 0.0004);
  CHECK(a.rod.youngs_modulus == 1e4);
  CHECK(a.rod.shear_modulus == 1e3);
  CHECK(a.rod.density == 700.0);
  CHECK(a.rod.elements == 100);
  CHECK(a.sim.dt == 1e-5);
  CHECK(a.controller.gamma == 0.01);
  CHECK(a.solver.learning_rate == 0.01);
  CHECK(a.mu_tip == 1e3);
  REQUIRE(a.targets.size() == 2);
  CHECK(a.targets[1] == Vec2(0.0, 0.02));

  const ScenarioConfig desk = ScenarioConfig::defaults(Scenario::reach_multi, Profile::desk);
  CHECK(desk.rod.elements == 50);
  CHECK(desk.sim.dt == 2e-5);

  const ScenarioConfig c = ScenarioConfig::defaults(Scenario::reach_obstacles, Profile::desk);
  REQUIRE(c.obstacles.size() == 2);
  CHECK(c.obstacles[1].center == Vec2(0.154, 0.06));
  CHECK(c.obstacles[0].diameter == 0.08);

  const ScenarioConfig d = ScenarioConfig::defaults(Scenario::grasp, Profile::desk);
  CHECK(d.mu_tip == 0.0);
  REQUIRE(d.grasp_object);
  CHECK(d.grasp_object->activation_fraction == 0.4);
  for (auto s : {Scenario::reach_multi, Scenario::reach_moving, Scenario::reach_obstacles,
                 Scenario::grasp}) {
    CHECK_NOTHROW(ScenarioConfig::defaults(s, Profile::desk).validate());
    CHECK_NOTHROW(ScenarioConfig::defaults(s, Profile::paper).validate());
  }
}

TEST_CASE("configuration files") {
  SUBCASE("sections and overrides") {
    const ScenarioConfig c = parse(
        "# comment\n"
        "scenario = reach_moving\n"
        "profile = paper\n"
        "[rod]\n"
        "elements = 40\n"
        "[sim]\n"
        "dt = 3e-5\n"
        "[task]\n"
        "targets = 0.1 0.05\n"
        "target_velocity = 0 -0.02\n"
        "[output]\n"
        "prefix = mine\n");
    CHECK(c.scenario == Scenario::reach_moving);
    CHECK(c.profile == Profile::paper);
    CHECK(c.rod.elements == 40);
    CHECK(c.sim.dt == 3e-5);
    CHECK(c.targets.front() == Vec2(0.1, 0.05));
    CHECK(c.target_velocity == Vec2(0.0, -0.02));
    CHECK(c.prefix() == "mine");
    CHECK(c.controller.control_steps == 20);
  }
  SUBCASE("the profile argument wins over the file") {
    std::istringstream in("scenario = grasp\nprofile = paper\n");
    CHECK(parse_config(in, Profile::desk).rod.elements == 50);
  }
  SUBCASE("obstacles and grasp objects") {
    const ScenarioConfig c = parse(
        "scenario = reach_obstacles\n[task]\nobstacles = 0.05 0.06 0.08; 0.15 0.06 0.07\n"
        "obstacle_weight = 2e4\n");
    REQUIRE(c.obstacles.size() == 2);
    CHECK(c.obstacles[1].diameter == 0.07);
    CHECK(c.obstacles[0].weight == 2e4);
    const ScenarioConfig g = parse(
        "scenario = grasp\n[task]\ngrasp_weight = 500\ngrasp_object = 0.07 0.02 0.03\n");
    CHECK(g.grasp_object->center == Vec2(0.07, 0.02));
    CHECK(g.grasp_object->weight == 500.0);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(parse("profile = desk\n"), ConfigError);
    CHECK_THROWS_AS(parse("scenario = swim\n"), ConfigError);
    CHECK_THROWS_AS(parse("scenario = grasp\n[task]\nmu_tip = 1000\n"), ConfigError);
    CHECK_THROWS_AS(parse("scenario = reach_multi\n[rod]\nlenght = 0.2\n"), ConfigError);
    CHECK_THROWS_AS(parse("scenario = reach_multi\n[rod]\nelements = many\n"), ConfigError);
    CHECK_THROWS_AS(parse("scenario = reach_multi\n[rod]\ndensity = -1\n"), ConfigError);
    CHECK_THROWS_AS(parse("scenario = reach_multi\n[sim]\ndt = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse("scenario = reach_multi\n[task]\ntargets = 0.1\n"), ConfigError);
    CHECK_THROWS_AS(parse("scenario = reach_multi\n[task]\ntarget_velocity = 1 0\n"), ConfigError);
    CHECK_THROWS_AS(parse("scenario = reach_multi\n[sim]\ndt = 1\ndt = 2\n"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/config.ini"), ConfigError);
  }
}

TEST_CASE("task schedules") {
  const ScenarioConfig b = ScenarioConfig::defaults(Scenario::reach_moving, Profile::desk);
  CHECK(task_at(b, 0.0).target->isApprox(Vec2(0.12, 0.09)));
  CHECK(task_at(b, 2.0).target->isApprox(Vec2(0.10, 0.09)));

  ScenarioConfig still = b;
  still.target_velocity.setZero();
  CHECK(*task_at(still, 5.0).target == *task_at(still, 0.0).target);

  const ScenarioConfig d = ScenarioConfig::defaults(Scenario::grasp, Profile::desk);
  CHECK(task_at(d, 0.0).grasp->weight == doctest::Approx(d.grasp_ramp_start));
  CHECK(task_at(d, 0.5).grasp->weight ==
        doctest::Approx(std::sqrt(d.grasp_ramp_start * d.grasp_object->weight)));
  CHECK(task_at(d, 3.0).grasp->weight == d.grasp_object->weight);
  CHECK(task_at(d, 3.0).mu_tip == 0.0);

  const ScenarioConfig a = ScenarioConfig::defaults(Scenario::reach_multi, Profile::desk);
  CHECK(task_sequence(a).size() == 2);
}

TEST_CASE("distance metrics") {
  const ScenarioConfig a = ScenarioConfig::defaults(Scenario::reach_multi, Profile::desk);
  const RodGeometry geometry(a.rod);
  const RodState rest = RodState::straight(geometry);

  SUBCASE("tip on the target gives zeros") {
    Trajectory t;
    for (int k = 0; k < 3; ++k) {
      Frame f = frame_of(rest, 0.1 * k);
      f.target = rest.node(geometry.elements());
      t.frames.push_back(f);
    }
    for (double d : distance_metric(t, a)) CHECK(d == 0.0);
  }
  SUBCASE("normalised by the rod length") {
    Trajectory t;
    Frame f = frame_of(rest, 0.0);
    f.target = Vec2(0.2, 0.02);
    t.frames.push_back(f);
    CHECK(distance_metric(t, a).front() == doctest::Approx(0.1));
  }
  SUBCASE("grasp gap against direct quadrature") {
    const ScenarioConfig d = ScenarioConfig::defaults(Scenario::grasp, Profile::desk);
    const GraspObject& object = *d.grasp_object;
    // Rod bent into an arc; independent trapezoidal quadrature over the
    // active part with the taper formula written out.
    RodState arc = rest;
    const double kappa = 9.0;
    const int n = geometry.elements();
    for (int i = 0; i <= n; ++i) {
      const double s = geometry.node_s(i);
      arc.x[i] = std::sin(kappa * s) / kappa;
      arc.y[i] = (1.0 - std::cos(kappa * s)) / kappa;
    }
    double num = 0.0;
    double den = 0.0;
    const double length = d.rod.length;
    for (int i = 0; i <= n; ++i) {
      const double s = length * i / n;
      if (s < object.activation_fraction * length - 1e-12) continue;
      const double phi = d.rod.diameter_base + (d.rod.diameter_tip - d.rod.diameter_base) * s / length;
      const double w = (i == n ? 0.5 : 1.0) * object.weight;
      const double gap =
          std::abs(std::hypot(arc.x[i] - 0.06, arc.y[i] - 0.03) - 0.5 * (object.diameter + phi));
      num += w * gap;
      den += w;
    }
    Trajectory t;
    t.frames.push_back(frame_of(arc, 0.0));
    CHECK(distance_metric(t, d).front() == doctest::Approx(num / den / length).epsilon(1e-12));
  }
}

TEST_CASE("output files") {
  const int n = 4;
  SUBCASE("empty trajectory writes headers only") {
    std::ostringstream traj, diag;
    write_trajectory_csv(traj, Trajectory{}, n);
    write_diagnostics_csv(diag, Trajectory{}, {});
    CHECK(traj.str() ==
          "t,x_0,x_1,x_2,x_3,x_4,y_0,y_1,y_2,y_3,y_4,theta_0,theta_1,theta_2,theta_3\n");
    CHECK(diag.str() == "t,kinetic,potential_desired,hamiltonian_bar,control_norm,distance\n");
  }
  SUBCASE("one frame, one row, and a bit-exact round trip") {
    Trajectory t;
    Frame f;
    f.t = 0.1;
    f.x = Vector::LinSpaced(n + 1, 0.0, 0.2) * (1.0 / 3.0);
    f.y = Vector::LinSpaced(n + 1, 1e-300, 2.0 / 7.0);
    f.theta = Vector::LinSpaced(n, -std::acos(-1.0), 1e10 / 3.0);
    t.frames.push_back(f);
    DiagnosticSample s;
    s.t = 0.1;
    s.kinetic = 1.0 / 3.0;
    s.potential_desired = 5e-324;
    s.hamiltonian_bar = std::exp(1.0);
    s.control_norm = 123456.789;
    t.diagnostics.push_back(s);

    std::stringstream traj;
    write_trajectory_csv(traj, t, n);
    const auto rows = read_csv(traj, nullptr);
    REQUIRE(rows.size() == 1);
    REQUIRE(rows[0].size() == static_cast<std::size_t>(2 * (n + 1) + n + 1));
    CHECK(rows[0][0] == f.t);
    for (int i = 0; i <= n; ++i) {
      CHECK(rows[0][1 + i] == f.x[i]);
      CHECK(rows[0][2 + n + i] == f.y[i]);
    }
    for (int e = 0; e < n; ++e) CHECK(rows[0][3 + 2 * n + e] == f.theta[e]);

    std::stringstream diag;
    write_diagnostics_csv(diag, t, {0.25 / 3.0});
    const auto drows = read_csv(diag, nullptr);
    REQUIRE(drows.size() == 1);
    CHECK(drows[0][1] == s.kinetic);
    CHECK(drows[0][2] == s.potential_desired);
    CHECK(drows[0][3] == s.hamiltonian_bar);
    CHECK(drows[0][4] == s.control_norm);
    CHECK(drows[0][5] == 0.25 / 3.0);
  }
  SUBCASE("summary is key = value") {
    RunReport r;
    r.scenario = "grasp";
    r.profile = "desk";
    r.final_distance = 0.5;
    r.switch_times = {1.5, 2.5};
    std::ostringstream out;
    write_summary(out, r);
    CHECK(out.str().find("scenario = grasp\n") != std::string::npos);
    CHECK(out.str().find("final_distance = 0.5\n") != std::string::npos);
    CHECK(out.str().find("switch_times = 1.5 2.5\n") != std::string::npos);
  }
}

TEST_CASE("runs are deterministic and emit their files") {
  ScenarioConfig c = ScenarioConfig::defaults(Scenario::reach_moving, Profile::desk);
  c.rod.elements = 10;
  c.sim.duration = 0.02;
  c.solver.max_iter = 50;
  const auto base = std::filesystem::temp_directory_path() / "cosserat_determinism";
  std::filesystem::remove_all(base);
  RunResult first = run_scenario(c);
  emit_outputs(first, c, base / "a");
  RunResult second = run_scenario(c);
  emit_outputs(second, c, base / "b");
  REQUIRE(first.report.files.size() == 3);
  for (const auto& file : first.report.files) {
    CHECK(std::filesystem::exists(file));
    CHECK(slurp(file) == slurp(base / "b" / file.filename()));
  }
  CHECK(first.report.final_distance >= 0.0);
  CHECK(first.report.min_obstacle_clearance >= 0.0);

  const auto traces = write_sweep_traces(c, base / "trace");
  REQUIRE(traces.size() == 1);
  std::ifstream in(traces.front());
  std::string header;
  const auto rows = read_csv(in, &header);
  CHECK(header == "k,cost,update_norm,tip_error");
  CHECK(rows.size() == 50);
  std::filesystem::remove_all(base);
}
