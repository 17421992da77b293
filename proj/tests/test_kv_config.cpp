#include <jumpnav/errors.hpp>
#include <jumpnav/kv_config.hpp>
#include <jumpnav/model_params.hpp>

#include <doctest.h>

using namespace jumpnav;

TEST_CASE("kv parse, typed lookup, and round trip") {
  const std::string text =
      "# robot tuning\n"
      "body_mass 9.5\n"
      "\n"
      "gravity 9.81   # m/s^2\n"
      "name window13\n";
  KvConfig cfg = KvConfig::parse(text, "inline");
  CHECK(cfg.get_double("body_mass") == 9.5);
  CHECK(cfg.get_double("gravity") == 9.81);
  CHECK(cfg.get_string("name") == "window13");
  CHECK(cfg.has("body_mass"));
  CHECK(!cfg.has("missing"));
  CHECK(cfg.get_double("missing", 3.0) == 3.0);
  CHECK_THROWS_AS(cfg.get_double("missing"), ParseError);
  CHECK_THROWS_AS(cfg.get_double("name"), ParseError);

  const std::string out = cfg.serialize();
  KvConfig again = KvConfig::parse(out, "round");
  CHECK(again.get_double("body_mass") == 9.5);
  CHECK(again.get_string("name") == "window13");
  CHECK(again.serialize() == out);
}

TEST_CASE("kv parse errors carry origin and line") {
  CHECK_THROWS_WITH_AS(KvConfig::parse("just_a_key\n", "f.cfg"),
                       doctest::Contains("f.cfg:1"), ParseError);
  CHECK_THROWS_AS(KvConfig::parse("bad! 3\n", "g.cfg"), ParseError);
}

TEST_CASE("serialized doubles survive a round trip exactly") {
  KvConfig cfg;
  const double v = 0.1 + 0.2;  // not representable prettily
  cfg.set_double("x", v);
  cfg.set_double("tiny", 1e-17);
  KvConfig back = KvConfig::parse(cfg.serialize(), "exact");
  CHECK(back.get_double("x") == v);
  CHECK(back.get_double("tiny") == 1e-17);
}

TEST_CASE("content hash is stable and order sensitive") {
  KvConfig a;
  a.set_string("k1", "v1");
  a.set_string("k2", "v2");
  KvConfig b;
  b.set_string("k2", "v2");
  b.set_string("k1", "v1");
  CHECK(a.hash() != b.hash());
  KvConfig a2 = KvConfig::parse(a.serialize(), "copy");
  CHECK(a.hash() == a2.hash());
}

TEST_CASE("model params config round trip preserves every field") {
  ModelParams p;
  p.payload_mass = 2.0;
  p.torque_limit = 28.0;
  p.link_com_offset = {0.09, 0.11};
  const KvConfig cfg = p.to_config();
  const ModelParams q = ModelParams::from_config(cfg);
  CHECK(q.payload_mass == 2.0);
  CHECK(q.torque_limit == 28.0);
  CHECK(q.link_com_offset[0] == 0.09);
  CHECK(q.link_com_offset[1] == 0.11);
  CHECK(q.body_mass == p.body_mass);
  CHECK(q.total_mass() == p.total_mass());
  CHECK(p.to_config().hash() == q.to_config().hash());
}

TEST_CASE("partial config overrides defaults only where present") {
  KvConfig cfg = KvConfig::parse("payload_mass 1.5\n", "partial");
  const ModelParams p = ModelParams::from_config(cfg);
  const ModelParams d;
  CHECK(p.payload_mass == 1.5);
  CHECK(p.body_mass == d.body_mass);
  CHECK(p.torque_limit == d.torque_limit);
}
