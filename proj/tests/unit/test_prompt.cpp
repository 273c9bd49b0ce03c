#include <catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "support.hpp"
#include "surveyor/io.hpp"
#include "surveyor/prompt.hpp"

using namespace surveyor;
using Catch::Matchers::ContainsSubstring;

namespace {

Instrument bundled(const std::string& name) {
  return load_instrument_file(test_support::data_dir() / "instruments" / (name + ".json"));
}

std::string golden(const std::string& name) {
  return io::read_file(test_support::test_dir() / "fixtures/golden" / name);
}

std::vector<PromptExchange> history(const Instrument& ins, const std::vector<std::string>& answers) {
  std::vector<PromptExchange> h;
  for (std::size_t i = 0; i < answers.size(); ++i)
    h.push_back({ins.items[i].ordinal, ins.items[i].text, answers[i]});
  return h;
}

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + needle.size())) ++n;
  return n;
}

}  // namespace

TEST_CASE("golden prompts", "[prompt]") {
  const auto hvs = bundled("hvs21");
  const auto hex = bundled("hexaco60");
  const auto demo = bundled("demographics");

  CHECK(render_stateless(hvs, hvs.items[0]).text == golden("hvs21_stateless_item01.txt"));
  CHECK(render_with_memory(hvs, hvs.items[2], history(hvs, {"3", " 5"})).text == golden("hvs21_memory_item03.txt"));
  CHECK(render_stateless(hex, hex.items[51]).text == golden("hexaco60_stateless_item52.txt"));
  CHECK(render_with_memory(hex, hex.items[2], history(hex, {"2", "4"})).text == golden("hexaco60_memory_item03.txt"));
  CHECK(render_stateless(demo, demo.items[0]).text == golden("demographics_stateless_age.txt"));
  CHECK(render_with_memory(demo, demo.items[1], history(demo, {"33"})).text == golden("demographics_memory_gender.txt"));
}

TEST_CASE("stateless rendering", "[prompt]") {
  for (const char* name : {"hvs21", "hexaco60", "demographics"}) {
    const auto ins = bundled(name);
    for (const auto& item : ins.items) {
      INFO(item.id);
      auto p = render_stateless(ins, item);
      CHECK(p.item_id == item.id);
      CHECK(p.mode == PromptMode::stateless);
      CHECK(p.token_estimate > 0);
      CHECK(p.text.ends_with("Response: "));
      CHECK(count(p.text, item.text) == 1);
      CHECK(p.text == render_stateless(ins, item).text);
    }
  }
  const auto demo = bundled("demographics");
  CHECK(render_stateless(demo, demo.items[0]).text == "How old are you?\nResponse: ");
}

TEST_CASE("memory rendering", "[prompt]") {
  const auto hvs = bundled("hvs21");
  SECTION("empty history reduces to stateless") {
    auto m = render_with_memory(hvs, hvs.items[0], {});
    CHECK(m.mode == PromptMode::memory);
    CHECK(m.text == render_stateless(hvs, hvs.items[0]).text);
  }
  SECTION("item i carries i-1 earlier responses") {
    std::vector<std::string> answers;
    for (const auto& item : hvs.items) {
      auto p = render_with_memory(hvs, item, history(hvs, answers));
      CHECK(count(p.text, "Response: ") == static_cast<std::size_t>(item.ordinal));
      CHECK(p.text.ends_with(std::string(item.text) + "\nResponse: ") == (item.ordinal > 1));
      answers.push_back(std::to_string(1 + item.ordinal % 6));
    }
  }
  SECTION("wrong history is a protocol error naming ordinals") {
    const auto& item5 = hvs.items[4];
    auto h = history(hvs, {"1", "2", "3"});
    CHECK_THROWS_AS(render_with_memory(hvs, item5, h), ProtocolError);
    CHECK_THROWS_WITH(render_with_memory(hvs, item5, h), ContainsSubstring("1..4") && ContainsSubstring("[1,2,3]"));
    auto shuffled = history(hvs, {"1", "2"});
    std::swap(shuffled[0], shuffled[1]);
    CHECK_THROWS_WITH(render_with_memory(hvs, hvs.items[2], shuffled), ContainsSubstring("[2,1]"));
  }
}

TEST_CASE("token estimate", "[prompt][tokens]") {
  CHECK(estimate_tokens("") == 0);
  CHECK(estimate_tokens("abcd") == 1);
  CHECK(estimate_tokens("abcde") == 2);
  // multibyte code points count once
  CHECK(estimate_tokens("\xc3\xa9\xc3\xa9\xc3\xa9\xc3\xa9") == 1);

  SECTION("monotone under concatenation") {
    const std::vector<std::string> parts{"", "a", "Statement: x", "\xe2\x82\xac\xe2\x82\xac", std::string(37, 'q')};
    for (const auto& s : parts)
      for (const auto& t : parts)
        CHECK(estimate_tokens(s + t) >= std::max(estimate_tokens(s), estimate_tokens(t)));
  }
  SECTION("full HVS memory prompt for item 21") {
    const auto hvs = bundled("hvs21");
    std::vector<std::string> answers(20, " 3");
    auto p = render_with_memory(hvs, hvs.items[20], history(hvs, answers));
    CHECK(p.token_estimate <= 4000);
    CHECK(fits_context(p.token_estimate, 4000));
    CHECK(p.token_estimate * 2 >= 733);
    CHECK(p.token_estimate <= 2 * 733);
  }
  SECTION("context guard keeps a 10 percent margin") {
    CHECK(fits_context(3600, 4000));
    CHECK_FALSE(fits_context(3601, 4000));
  }
}
