#include <doctest.h>

#include <sstream>

#include "../support.hpp"
#include "vcplm/errors.hpp"
#include "vcplm/io.hpp"

using namespace vcplm;

namespace {

std::string message_of(const std::string& csv) {
  std::istringstream in(csv);
  try {
    read_dataset_csv(in);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("csv round trip") {
    const Dataset d = vt::small_dataset(25, 91);
    std::stringstream buf;
    write_dataset_csv(buf, d);
    const Dataset back = read_dataset_csv(buf);
    CHECK(back.y == d.y);
    CHECK(back.eta == d.eta);
    CHECK(back.w == d.w);
    CHECK(back.x == d.x);
    CHECK(back.u == d.u);
    REQUIRE(back.xi);
    CHECK(*back.xi == *d.xi);
  }

  TEST_CASE("columns may come in any order") {
    std::istringstream in("U,X_1,Y,V,eta_1,W_1\n1,2,3,4,5,6\n0.5,1,2,3,4,5\n");
    const Dataset d = read_dataset_csv(in);
    CHECK(d.y(0) == 3.0);
    CHECK(d.u(1) == 0.5);
    CHECK(d.p2() == 1);
    CHECK(!d.xi);
  }

  TEST_CASE("schema diagnostics") {
    CHECK(message_of("Y,eta_1,V,W_1,X_1\n1,2,3,4,5\n").find("'U'") != std::string::npos);
    CHECK(message_of("Y,eta_1,V,W_1,X_1,U\n1,2,3,4,5\n").find("row 2") != std::string::npos);
    const auto bad = message_of("Y,eta_1,V,W_1,X_1,U\n1,2,3,4,5,6\n1,2,x,4,5,6\n");
    CHECK(bad.find("row 3") != std::string::npos);
    CHECK(bad.find("column 3") != std::string::npos);
    CHECK(message_of("Y,eta_1,V,W_2,X_1,U\n1,2,3,4,5,6\n").find("W_1") != std::string::npos);
    CHECK(message_of("Y,eta_1,V,Q,X_1,U\n1,2,3,4,5,6\n").find("'Q'") != std::string::npos);
    CHECK(!message_of("").empty());
    CHECK(!message_of("Y,eta_1,V,W_1,X_1,U\n").empty());
  }

  TEST_CASE("fit serialisation uses the documented field names") {
    const Dataset d = vt::small_dataset(60, 92);
    FitConfig cfg;
    cfg.h = 0.6;
    const Json j = fit_to_json(fit_pipeline(d, cfg));
    for (const char* key :
         {"theta_hat", "se_theta", "sigma2_hat", "alpha_grid", "trace_S", "mode", "bandwidths"})
      CHECK(j.contains(key));
    CHECK(j["alpha_grid"].contains("u"));
    CHECK(j["alpha_grid"]["alpha"].size() == 2);
    CHECK(j["alpha_grid"]["dalpha"][0].size() == 101);
    CHECK(j["bandwidths"]["h"] == 0.6);
    CHECK(j["mode"] == "proposed");
  }

  TEST_CASE("test serialisation") {
    TestResult r;
    r.test = "ratio";
    r.p_asymptotic = 0.3;
    const Json j = test_to_json(r);
    for (const char* key : {"test", "statistic", "scaled_statistic", "rho_n", "df",
                            "p_asymptotic", "p_bootstrap", "B", "seed", "critical_value"})
      CHECK(j.contains(key));
    CHECK(j["p_bootstrap"].is_null());
  }

  TEST_CASE("scenario config") {
    const Json j = Json::parse(R"({"preset": "scenario_iii", "replicates": 7, "sweep_values": [0.0]})");
    const ScenarioSpec s = scenario_from_json(j);
    CHECK(s.replicates == 7);
    CHECK(s.beta(0) == 0.2);
    const ScenarioSpec round = scenario_from_json(scenario_to_json(s));
    CHECK(dump_json(scenario_to_json(round)) == dump_json(scenario_to_json(s)));
    CHECK_THROWS_AS(scenario_from_json(Json::parse(R"({"bogus": 1})")), ValidationError);
    CHECK_THROWS_AS(scenario_from_json(Json::parse(R"({"n": "ten"})")), ValidationError);
  }

  TEST_CASE("alpha curve layout") {
    const Dataset d = vt::small_dataset(50, 93);
    FitConfig cfg;
    cfg.h = 0.7;
    std::ostringstream os;
    write_alpha_curve(os, fit_pipeline(d, cfg));
    const std::string text = os.str();
    CHECK(text.rfind("u,alpha_1,alpha_2\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 102);
  }
}
