#include <gtest/gtest.h>

#include <fstream>
#include <stdexcept>
#include <string>

#include "modreach/config.hpp"

using namespace modreach;

namespace {

std::string write_tmp(const char* name, const std::string& text) {
  const std::string path = std::string(::testing::TempDir()) + name;
  std::ofstream f(path, std::ios::trunc);
  f << text;
  return path;
}

}  // namespace

TEST(Config, DefaultsCoverKnownKeys) {
  RunConfig cfg;
  EXPECT_EQ(cfg.get_int("arm.dof"), 3);
  EXPECT_DOUBLE_EQ(cfg.get_double("arm.action_step"), 0.04);
  EXPECT_DOUBLE_EQ(cfg.get_double("arm.reach_delta"), 0.05);
  EXPECT_DOUBLE_EQ(cfg.get_double("control.gamma"), 0.99);
  EXPECT_EQ(cfg.get_int("perception.batch"), 128);
  EXPECT_DOUBLE_EQ(cfg.get_double("finetune.beta"), 0.8);
  EXPECT_EQ(cfg.get("control.method"), "kgps");
  EXPECT_FALSE(cfg.overridden("arm.dof"));
}

TEST(Config, UnknownKeyRejected) {
  RunConfig cfg;
  EXPECT_THROW(cfg.set("arm.bogus", "1"), std::invalid_argument);
  EXPECT_THROW(cfg.set("nonsense", "x"), std::invalid_argument);
}

TEST(Config, SetOverridesDefault) {
  RunConfig cfg;
  cfg.set("arm.dof", "2");
  EXPECT_EQ(cfg.get_int("arm.dof"), 2);
  EXPECT_TRUE(cfg.overridden("arm.dof"));
}

TEST(Config, LoadFileSectionsAndComments) {
  const std::string path = write_tmp("cfg_ok.cfg",
                                     "# top comment\n"
                                     "[arm]\n"
                                     "dof = 2\n"
                                     "; another comment\n"
                                     "[control]\n"
                                     "gamma = 0.9\n"
                                     "method=egreedy\n");
  RunConfig cfg;
  cfg.load_file(path);
  EXPECT_EQ(cfg.get_int("arm.dof"), 2);
  EXPECT_DOUBLE_EQ(cfg.get_double("control.gamma"), 0.9);
  EXPECT_EQ(cfg.get("control.method"), "egreedy");
}

TEST(Config, LoadFileUnknownKeyFailsWithLineNumber) {
  const std::string path = write_tmp("cfg_bad.cfg", "[arm]\nwheels = 4\n");
  RunConfig cfg;
  try {
    cfg.load_file(path);
    FAIL() << "expected rejection of unknown key";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("2"), std::string::npos);
  }
}

TEST(Config, NumericParsesAreStrict) {
  RunConfig cfg;
  cfg.set("arm.dof", "2x");
  EXPECT_THROW(cfg.get_int("arm.dof"), std::invalid_argument);
  cfg.set("control.gamma", "0.9.5");
  EXPECT_THROW(cfg.get_double("control.gamma"), std::invalid_argument);
  cfg.set("control.gamma", " 0.95");
  EXPECT_DOUBLE_EQ(cfg.get_double("control.gamma"), 0.95);
}

TEST(Config, BoolAcceptsCommonSpellings) {
  RunConfig cfg;
  for (const char* t : {"true", "1", "yes", "on"}) {
    cfg.set("data.augment", t);
    EXPECT_TRUE(cfg.get_bool("data.augment")) << t;
  }
  for (const char* f : {"false", "0", "no", "off"}) {
    cfg.set("data.augment", f);
    EXPECT_FALSE(cfg.get_bool("data.augment")) << f;
  }
  cfg.set("data.augment", "maybe");
  EXPECT_THROW(cfg.get_bool("data.augment"), std::invalid_argument);
}

TEST(Config, ListParsesCommaSeparatedDoubles) {
  RunConfig cfg;
  const auto links = cfg.get_list("arm.links");
  ASSERT_EQ(links.size(), 3u);
  EXPECT_DOUBLE_EQ(links[0], 0.37);
  EXPECT_DOUBLE_EQ(links[1], 0.374);
  EXPECT_DOUBLE_EQ(links[2], 0.229);
}

TEST(Config, EchoRoundTripsThroughLoadFile) {
  RunConfig cfg;
  cfg.set("arm.dof", "1");
  cfg.set("control.lr_start", "0.025");
  const std::string path = write_tmp("cfg_echo.cfg", cfg.echo());
  RunConfig back;
  back.load_file(path);
  EXPECT_EQ(back.get_int("arm.dof"), 1);
  EXPECT_DOUBLE_EQ(back.get_double("control.lr_start"), 0.025);
  EXPECT_DOUBLE_EQ(back.get_double("control.gamma"), 0.99);
}

TEST(Config, ArmFromConfigAppliesOverrides) {
  RunConfig cfg;
  cfg.set("arm.dof", "2");
  cfg.set("arm.max_steps", "100");
  const ArmModel m = arm_from_config(cfg);
  EXPECT_EQ(m.dof, 2);
  EXPECT_EQ(m.max_steps, 100);
  EXPECT_DOUBLE_EQ(m.links[0], 0.37);
}

TEST(Config, ArmFromConfigRejectsBadListArity) {
  RunConfig cfg;
  cfg.set("arm.links", "0.37,0.374");
  EXPECT_THROW(arm_from_config(cfg), std::invalid_argument);
}

TEST(Config, ArmFromConfigRejectsBadDof) {
  RunConfig cfg;
  cfg.set("arm.dof", "4");
  EXPECT_THROW(arm_from_config(cfg), std::invalid_argument);
}

TEST(Config, RenderFromConfigRejectsNonPositiveRadius) {
  RunConfig cfg;
  cfg.set("render.target_radius", "0");
  EXPECT_THROW(render_from_config(cfg), std::invalid_argument);
}

TEST(Config, MethodNameValidation) {
  EXPECT_TRUE(method_is_kgps("kgps"));
  EXPECT_FALSE(method_is_kgps("egreedy"));
  EXPECT_THROW(method_is_kgps("sarsa"), std::invalid_argument);
}

TEST(SceneLiteral, ParsesJointsAndTarget) {
  ArmModel m;
  const SceneConfig s = parse_scene_literal("q=0.1,0.2,-0.3;target=0.45,0.20", m);
  ASSERT_EQ(s.q.size(), 3);
  EXPECT_DOUBLE_EQ(s.q[0], 0.1);
  EXPECT_DOUBLE_EQ(s.q[1], 0.2);
  EXPECT_DOUBLE_EQ(s.q[2], -0.3);
  EXPECT_DOUBLE_EQ(s.target.x, 0.45);
  EXPECT_DOUBLE_EQ(s.target.y, 0.20);
}

TEST(SceneLiteral, JointArityMustMatchDof) {
  ArmModel m;
  m.dof = 2;
  EXPECT_THROW(parse_scene_literal("q=0.1,0.2,0.3;target=0.4,0.2", m), std::invalid_argument);
}

TEST(SceneLiteral, RejectsOutOfLimitJoint) {
  ArmModel m;
  EXPECT_THROW(parse_scene_literal("q=9,0,0;target=0.4,0.2", m), std::invalid_argument);
}

TEST(SceneLiteral, RejectsMalformedText) {
  ArmModel m;
  EXPECT_THROW(parse_scene_literal("q=0.1,0.2,0.3", m), std::invalid_argument);
  EXPECT_THROW(parse_scene_literal("target=0.4,0.2", m), std::invalid_argument);
  EXPECT_THROW(parse_scene_literal("q=a,b,c;target=0,0", m), std::invalid_argument);
}
