#include <map>

#include "doctest.h"
#include "oqs/hierarchy.hpp"

using namespace oqs;

namespace {

std::map<std::string, Verdict> verdicts(const HierarchyReport& h) {
  std::map<std::string, Verdict> out;
  for (const auto& r : h.reports) out[r.criterion] = r.verdict;
  return out;
}

constexpr Verdict P = Verdict::pass, F = Verdict::fail, I = Verdict::inconclusive;

void expect(const std::string& model, const std::map<std::string, Verdict>& want) {
  const HierarchyReport h = hierarchy_report(model);
  CHECK_MESSAGE(h.violations.empty(), model);
  const auto got = verdicts(h);
  for (const auto& [name, v] : want) {
    const std::string tag = model + "/" + name;
    REQUIRE_MESSAGE(got.count(name) == 1, tag);
    CHECK_MESSAGE(got.at(name) == v, (tag + " = " + to_string(got.at(name))));
  }
}

}  // namespace

TEST_CASE("names") {
  CHECK(is_model("tam"));
  CHECK(is_model("eternal"));
  CHECK_FALSE(is_model("nope"));
  CHECK(is_criterion("gqrf"));
  CHECK_FALSE(is_criterion("markov"));
  CHECK_THROWS_AS(run_criterion("nope", "fa"), std::invalid_argument);
  CHECK_THROWS_AS(run_criterion("tam", "markov"), std::invalid_argument);
  CHECK(run_criterion("eternal", "fa").verdict == I);
}

TEST_CASE("hierarchy: afl") {
  expect("afl", {{"fa", F}, {"qrf", P}, {"gqrf", F}, {"composability", P}, {"nib", P}, {"nqib", I},
                 {"divisibility", P}, {"semigroup", P}, {"distinguishability", P}, {"fdd", F}});
}

TEST_CASE("hierarchy: tam") {
  expect("tam", {{"fa", F}, {"qrf", F}, {"gqrf", F}, {"composability", F}, {"nib", F}, {"nqib", F},
                 {"divisibility", P}, {"semigroup", P}, {"distinguishability", P}, {"fdd", F}});
}

TEST_CASE("hierarchy: nqib") {
  expect("nqib", {{"fa", F}, {"qrf", F}, {"gqrf", F}, {"composability", F}, {"nib", F}, {"nqib", P},
                  {"divisibility", F}, {"semigroup", F}, {"distinguishability", F}, {"fdd", F}});
}

TEST_CASE("hierarchy: static dephasing") {
  expect("static-dephasing", {{"fa", F}, {"composability", F}, {"nib", F}, {"nqib", P}, {"divisibility", F},
                              {"distinguishability", F}, {"pu", P}, {"dd_echo", P}});
}

TEST_CASE("hierarchy: eternal") {
  expect("eternal", {{"divisibility", F}, {"semigroup", F}, {"distinguishability", P}});
}

TEST_CASE("settings override the triple") {
  RunSettings s;
  s.triple = TimeTriple{0.0, 0.0, 1.0};
  CHECK(run_criterion("tam", "composability", s).verdict == P);
}
