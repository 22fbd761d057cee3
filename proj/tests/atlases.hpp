#pragma once

// Hand-built atlases shared by the cech tests.

#include <string>
#include <vector>

#include "vjp/cech.hpp"
#include "vjp/parse.hpp"

namespace vjp::testing {

inline std::vector<Expr> exprs(const JetSpace& s, std::initializer_list<const char*> items) {
  std::vector<Expr> out;
  for (const char* t : items) out.push_back(parse(t, s, 4));
  return out;
}

inline Form area_form(const JetSpace& s, const std::string& g) {
  Form f;
  f.add({Symbol::field(0), Symbol::field(1)}, parse("4*" + g + "*(1+p^2+q^2)^-2", s, 4));
  return f;
}

inline SourceForm monopole_source(const JetSpace& s, const std::string& g) {
  return SourceForm{{parse("4*" + g + "*(1+p^2+q^2)^-2*q_t", s, 4), parse("-4*" + g + "*(1+p^2+q^2)^-2*p_t", s, 4)}};
}

inline const JetSpace& monopole_space() {
  static const JetSpace s({"t"}, {"p", "q"}, 1, {"g"});
  return s;
}

inline Chart plane_chart(const std::string& id) {
  return Chart{id, {{0.0, 1.0}}, {{-1.5, 1.5}, {-1.5, 1.5}}, {}, {}};
}

/// Stereographic charts N (from the south pole) and S (from the north pole,
/// with q reflected so both are positively oriented).
inline Atlas monopole_atlas() {
  const JetSpace& s = monopole_space();
  std::vector<Overlap> ov{
      {0, 1, exprs(s, {"t"}), exprs(s, {"p/(p^2+q^2)", "-q/(p^2+q^2)"})},
      {1, 0, exprs(s, {"t"}), exprs(s, {"p/(p^2+q^2)", "-q/(p^2+q^2)"})},
  };
  return Atlas(s, {plane_chart("N"), plane_chart("S")}, ov);
}

/// Adds chart E, stereographic from the point (-1,0,0).
inline Atlas monopole_atlas3() {
  const JetSpace& s = monopole_space();
  std::vector<Overlap> ov{
      {0, 1, exprs(s, {"t"}), exprs(s, {"p/(p^2+q^2)", "-q/(p^2+q^2)"})},
      {1, 0, exprs(s, {"t"}), exprs(s, {"p/(p^2+q^2)", "-q/(p^2+q^2)"})},
      {0, 2, exprs(s, {"t"}), exprs(s, {"2*q/(1+p^2+q^2+2*p)", "(1-p^2-q^2)/(1+p^2+q^2+2*p)"})},
      {2, 0, exprs(s, {"t"}), exprs(s, {"(1-p^2-q^2)/(1+p^2+q^2+2*q)", "2*p/(1+p^2+q^2+2*q)"})},
      {1, 2, exprs(s, {"t"}), exprs(s, {"-2*q/(1+p^2+q^2+2*p)", "(p^2+q^2-1)/(1+p^2+q^2+2*p)"})},
      {2, 1, exprs(s, {"t"}), exprs(s, {"(1-p^2-q^2)/(1+p^2+q^2-2*q)", "-2*p/(1+p^2+q^2-2*q)"})},
  };
  return Atlas(s, {plane_chart("N"), plane_chart("S"), plane_chart("E")}, ov);
}

/// S^2 at t = 0: upper hemisphere in N, lower in S.
inline Cycle sphere_cycle2() {
  const JetSpace& s = monopole_space();
  Cycle c{"sphere", 2, false, {}};
  c.pieces.push_back({0, exprs(s, {"0", "sin(pi*@s1/4)/cos(pi*@s1/4)*cos(2*pi*@s2)",
                                   "sin(pi*@s1/4)/cos(pi*@s1/4)*sin(2*pi*@s2)"}), 1});
  c.pieces.push_back({1, exprs(s, {"0", "cos(pi/4+pi*@s1/4)/sin(pi/4+pi*@s1/4)*cos(2*pi*@s2)",
                                   "-cos(pi/4+pi*@s1/4)/sin(pi/4+pi*@s1/4)*sin(2*pi*@s2)"}), 1});
  return c;
}

/// S^2 at t = 0 in polar angles about the x axis: the half x >= 0 in E, the
/// quarters x <= 0 with z >= 0 in N and z <= 0 in S.
inline Cycle sphere_cycle3() {
  const JetSpace& s = monopole_space();
  Cycle c{"sphere", 2, false, {}};
  const char* ea = "sin(pi*@s1/4)/cos(pi*@s1/4)*cos(pi*@s2)";
  const char* eb = "sin(pi*@s1/4)/cos(pi*@s1/4)*sin(pi*@s2)";
  c.pieces.push_back({2, exprs(s, {"0", ea, eb}), 1});
  c.pieces.push_back({2, exprs(s, {"0", "sin(pi*@s1/4)/cos(pi*@s1/4)*cos(pi+pi*@s2)",
                                   "sin(pi*@s1/4)/cos(pi*@s1/4)*sin(pi+pi*@s2)"}), 1});
  // theta = pi/2 (1 + s1); x = cos(theta), y = sin(theta) cos(phi), z = sin(theta) sin(phi)
  c.pieces.push_back({0, exprs(s, {"0", "cos(pi/2+pi*@s1/2)/(1+sin(pi/2+pi*@s1/2)*sin(pi*@s2))",
                                   "sin(pi/2+pi*@s1/2)*cos(pi*@s2)/(1+sin(pi/2+pi*@s1/2)*sin(pi*@s2))"}), 1});
  c.pieces.push_back({1, exprs(s, {"0", "cos(pi/2+pi*@s1/2)/(1-sin(pi/2+pi*@s1/2)*sin(pi+pi*@s2))",
                                   "-sin(pi/2+pi*@s1/2)*cos(pi+pi*@s2)/(1-sin(pi/2+pi*@s1/2)*sin(pi+pi*@s2))"}), 1});
  return c;
}

inline PartitionOfUnity monopole_partition() {
  const JetSpace& s = monopole_space();
  return PartitionOfUnity{exprs(s, {"(1+p^2+q^2)^-2", "1-(p^2+q^2)^2*(1+p^2+q^2)^-2"})};
}

inline const JetSpace& torus_space() {
  static const JetSpace s({"x"}, {"u"}, 2);
  return s;
}

/// Y = S^1 x S^1 over X = S^1 as one chart with two deck identifications.
inline Atlas torus_atlas() {
  const JetSpace& s = torus_space();
  Chart c{"T", {{0.0, 6.283185307179586}}, {{0.0, 6.283185307179586}}, {}, {parse("2*pi", s)}};
  std::vector<Overlap> ov{
      {0, 0, exprs(s, {"x+2*pi"}), exprs(s, {"u"})},
      {0, 0, exprs(s, {"x"}), exprs(s, {"u+2*pi"})},
  };
  return Atlas(s, {c}, ov);
}

inline Cycle torus_fiber_circle() {
  const JetSpace& s = torus_space();
  return Cycle{"fiber", 1, false, {{0, exprs(s, {"0", "2*pi*@s1"}), 1}}};
}

inline Cycle torus_base_circle() {
  const JetSpace& s = torus_space();
  return Cycle{"base-lift", 1, false, {{0, exprs(s, {"2*pi*@s1", "0"}), 1}}};
}

inline Cycle circle_x() {
  const JetSpace& s = torus_space();
  return Cycle{"circle", 1, true, {{0, exprs(s, {"2*pi*@s1"}), 1}}};
}

inline GlobalSection single_chart_section(const std::string& name, const JetSpace& s,
                                          std::initializer_list<const char*> values) {
  return GlobalSection{name, {exprs(s, values)}, {}, {}};
}

}  // namespace vjp::testing
