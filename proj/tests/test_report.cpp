#include <catch2/catch_amalgamated.hpp>

#include "autoenv/report.hpp"

using namespace autoenv;

namespace {

hpo::TrialRecord trial(std::size_t id, double omega, double dj, std::string tag = "search") {
    hpo::TrialRecord t;
    t.id = id;
    t.metrics = {omega, dj};
    t.invalid_share_std = 0.01;
    t.mean_error_std = 0.1;
    t.status = hpo::TrialStatus::complete;
    t.tag = std::move(tag);
    return t;
}

std::size_t count(const std::string& s, const std::string& needle) {
    std::size_t n = 0;
    for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
    return n;
}

}  // namespace

TEST_CASE("Pareto SVG colours and determinism", "[report]") {
    const std::vector<hpo::TrialRecord> ts = {trial(0, 0.1, 2.0), trial(1, 0.3, 1.0), trial(2, 0.4, 3.0)};
    const std::vector<hpo::TrialRecord> base = {trial(0, 0.5, 0.5, "baseline")};
    const auto svg = report::pareto_svg(ts, base, "voltage-control");
    CHECK(svg == report::pareto_svg(ts, base, "voltage-control"));
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(count(svg, "r=\"4\" fill=\"red\"><title>") == 2);
    CHECK(count(svg, "r=\"4\" fill=\"blue\"><title>") == 1);
    CHECK(count(svg, "r=\"4\" fill=\"green\"><title>") == 1);
    CHECK(count(svg, "stroke-opacity") == 4);
    CHECK(report::pareto_svg({}, {}, "empty").find("</svg>") != std::string::npos);
}

TEST_CASE("CSV tables", "[report]") {
    const auto csv = report::trials_csv({trial(0, 0.1, 2.0)});
    CHECK(csv.rfind("id,tag,status,invalid_share,mean_error", 0) == 0);
    CHECK(csv.find("\n0,search,complete,0.1,2,") != std::string::npos);
    const std::vector<report::Curve> curves = {{"a", {{1.0, 0.5}, {2.0, 0.25}}}};
    CHECK(report::curves_csv(curves) == "label,step,value\na,1,0.5\na,2,0.25\n");
    CHECK(report::curves_svg(curves, "t", "y").find("polyline") != std::string::npos);
}

TEST_CASE("rolling average over two points", "[report]") {
    CHECK(report::rolling_average({1.0, 3.0, 5.0, 9.0}) == std::vector<double>{1.0, 2.0, 4.0, 7.0});
    CHECK(report::rolling_average({1.0, 3.0, 5.0}, 1) == std::vector<double>{1.0, 3.0, 5.0});
    CHECK(report::rolling_average({}).empty());
    CHECK(report::fmt(0.125, 2) == "0.12");
    CHECK(report::fmt(std::nan(""), 3) == "nan");
}
