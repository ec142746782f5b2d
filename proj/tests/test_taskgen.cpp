#include <catch_amalgamated.hpp>

#include <map>
#include <set>
#include <sstream>

#include "iclprobe/model/backend.hpp"
#include "iclprobe/tasks.hpp"
#include "invariants.hpp"
#include "support.hpp"

using namespace iclprobe;
using test::desk_vocab;
using test::frequent_pool;

namespace {

std::string dump(const std::vector<TaskInstance>& suite) {
  std::ostringstream out;
  write_suite(out, suite);
  return out.str();
}


Vocabulary word_vocab(const std::vector<std::string>& words) {
  std::vector<std::string> tokens;
  for (const auto& w : words) tokens.push_back(" " + w);
  tokens.push_back(" ->");
  tokens.push_back(";");
  return Vocabulary(tokens);
}

test::InstanceChecker checker_for(const TokenPool* pool) {
  static std::set<TokenId> ids;
  test::InstanceChecker c;
  if (pool) {
    ids = std::set<TokenId>(pool->ids.begin(), pool->ids.end());
    c.pool = &ids;
  }
  c.delims = Delimiters::from(BpeEncoder(desk_vocab()));
  return c;
}

void require_clean(test::InstanceChecker& c, const std::vector<TaskInstance>& suite) {
  for (const auto& inst : suite) c.check(inst);
  INFO((c.problems.empty() ? std::string() : c.problems.front()));
  CHECK(c.problems.empty());
}

const Lexicon& lexicon() {
  static const Lexicon l = load_lexicon(DataAssets{}.lexicon_path());
  return l;
}

const std::vector<CountryCapital>& capitals() {
  static const auto c = load_capitals(DataAssets{}.capitals_path());
  return c;
}

}  // namespace

TEST_CASE("lsc composes the copying template", "[lsc]") {
  const auto v = word_vocab({"Category", "40", "ids", "node", "struction", "Yolk", "yes"});
  const std::vector<TokenId> pattern{0, 1, 2, 3}, gap{5, 6};
  const auto comp = compose_lsc(pattern, 4, gap);
  CHECK(v.decode(comp.prompt) == " Category 40 ids node struction Yolk yes Category 40 ids node");
}

TEST_CASE("lsc with |P|=1 and |R|=0 is a b a", "[lsc]") {
  const auto v = word_vocab({"a", "b"});
  const auto pool = build_pool_index_range(v, 0, 2);
  for (const auto& inst : gen_lsc(pool, {1, 0}, 7, 20)) {
    REQUIRE(inst.prompt.size() == 3);
    CHECK(inst.prompt[0] == inst.prompt[2]);
    CHECK(inst.prompt[1] == inst.answer);
    CHECK(inst.prompt[0] != inst.answer);
  }
}

TEST_CASE("generators are deterministic in the seed", "[determinism]") {
  const auto& pool = frequent_pool();
  CHECK(dump(gen_lsc(pool, {5, 5}, 42, 3)) == dump(gen_lsc(pool, {5, 5}, 42, 3)));
  CHECK(dump(gen_lsc(pool, {5, 5}, 42, 3)) != dump(gen_lsc(pool, {5, 5}, 43, 3)));
  const auto delims = Delimiters::from(BpeEncoder(desk_vocab()));
  CHECK(dump(gen_wc(pool, {}, delims, 9, 5)) == dump(gen_wc(pool, {}, delims, 9, 5)));
  const auto a = gen_lscg(pool, {}, 11, 50);
  const auto b = gen_lscg(pool, {}, 11, 10);
  for (std::size_t i = 0; i < b.size(); ++i) CHECK(instance_to_json(a[i]) == instance_to_json(b[i]));
}

TEST_CASE("lsc and lscg satisfy the template invariants", "[lsc][lscg]") {
  const auto& pool = frequent_pool();
  auto c = checker_for(&pool);
  require_clean(c, gen_lsc(pool, {5, 5}, 1, 300));
  require_clean(c, gen_lsc(pool, {10, 0}, 2, 300));
  require_clean(c, gen_lscg(pool, {5, 10, 2}, 3, 300));
  require_clean(c, gen_lscg(pool, {3, 4, 6}, 4, 300));
}

TEST_CASE("lscg composes the gapped template", "[lscg]") {
  const auto v = word_vocab({"Category", "40", "ids", "node", "Garlic", "right", "X", "struction", "Yolk", "yes",
                             "total", "Content"});
  const std::vector<TokenId> pattern{0, 1, 2, 3}, u{4, 5}, r{8, 9}, vgap{10, 11};
  const auto comp = compose_lscg(pattern, u, 6, 7, r, vgap);
  CHECK(v.decode(comp.prompt) ==
        " Category 40 ids node Garlic right X struction Yolk yes Category 40 ids node total Content X");
  CHECK(induction_oracle_predict(comp.prompt) == 7);
}

TEST_CASE("lscg with no inner gap is lsc with pattern P X", "[lscg]") {
  const auto& pool = frequent_pool();
  for (std::uint64_t i = 0; i < 25; ++i) {
    const auto g = make_lscg_instance(pool, {4, 3, 0}, 5, i);
    const auto l = make_lsc_instance(pool, {5, 3}, 5, i);
    CHECK(g.prompt == l.prompt);
    CHECK(g.answer == l.answer);
  }
}

TEST_CASE("wc minimal prompt", "[wc]") {
  const auto v = word_vocab({"f", "l"});
  const auto pool = build_pool_index_range(v, 0, 2);
  const Delimiters delims{{2}, {3}};
  const auto inst = make_wc_instance(pool, {1, 1, 0, 1}, delims, 3, 0);
  CHECK(v.decode(inst.prompt) == " f -> l; f ->");
  CHECK(v.token(inst.answer) == " l");
}

TEST_CASE("wc demo line layout", "[wc]") {
  const auto v = word_vocab({"40", "ids", "node", "gluten", "Tim", "yes"});
  const Delimiters delims{{6}, {7}};
  const auto comp = compose_demo_prompt({{{0, 1, 2}, {3}}}, std::vector<TokenId>{1, 4, 5}, delims);
  CHECK(v.decode(comp.prompt) == " 40 ids node -> gluten; ids Tim yes ->");
}

TEST_CASE("wc satisfies its invariants", "[wc]") {
  const auto& pool = frequent_pool();
  auto c = checker_for(&pool);
  const auto delims = Delimiters::from(BpeEncoder(desk_vocab()));
  require_clean(c, gen_wc(pool, {}, delims, 1, 300));
  require_clean(c, gen_wc(pool, {6, 2, 3, 2}, delims, 2, 300));
  require_clean(c, gen_wc(pool, {4, 4, 0, 1}, delims, 3, 300));
}

TEST_CASE("wc rejects more labels than features and small pools", "[wc]") {
  const auto& pool = frequent_pool();
  const auto delims = Delimiters::from(BpeEncoder(desk_vocab()));
  CHECK_THROWS_MATCHES(gen_wc(pool, {2, 3, 1, 1}, delims, 1, 1), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) { return e.code() == ErrorCode::InvalidConfig; }));
  const auto small = build_pool_index_range(desk_vocab(), 300, 305);
  CHECK_THROWS_MATCHES(gen_wc(small, {3, 2, 7, 1}, delims, 1, 1), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) { return e.code() == ErrorCode::PoolTooSmall; }));
}

TEST_CASE("wi picks the target index of the query", "[wi]") {
  const auto v = word_vocab({"40", "ids", "node", "Tim", "crane", "yes", "total", "mark", "Yolk"});
  const Delimiters delims{{9}, {10}};
  const auto comp =
      compose_demo_prompt({{{0, 1, 2}, {1}}, {{3, 4, 5}, {4}}}, std::vector<TokenId>{6, 7, 8}, delims);
  CHECK(v.decode(comp.prompt) == " 40 ids node -> ids; Tim crane yes -> crane; total mark Yolk ->");

  const auto& pool = frequent_pool();
  const auto d = Delimiters::from(BpeEncoder(desk_vocab()));
  const auto first = make_wi_instance(pool, {2, 0, 1}, d, 5, 0);
  CHECK(first.answer == first.prompt[first.span("query")->begin]);
  const auto last = make_wi_instance(pool, {4, 3, 2}, d, 5, 0);
  CHECK(last.answer == last.prompt[last.span("query")->end - d.arrow.size() - 1]);
}

TEST_CASE("wi satisfies its invariants", "[wi]") {
  const auto& pool = frequent_pool();
  auto c = checker_for(&pool);
  const auto delims = Delimiters::from(BpeEncoder(desk_vocab()));
  require_clean(c, gen_wi(pool, {}, delims, 1, 300));
  require_clean(c, gen_wi(pool, {7, 6, 3}, delims, 2, 300));
  const auto small = build_pool_index_range(desk_vocab(), 300, 310);
  CHECK_THROWS_AS(gen_wi(small, {3, 1, 3}, delims, 1, 1), Error);
}

TEST_CASE("tt composes translation pairs", "[tt]") {
  const BpeEncoder enc(desk_vocab());
  const auto delims = Delimiters::from(enc);
  auto words = [&](const std::string& w) { return enc.encode(" " + w); };
  const auto comp = compose_demo_prompt({{words("cat"), words("Katze")}, {words("owl"), words("Eule")}},
                                        words("dog"), delims);
  CHECK(desk_vocab().decode(comp.prompt) == " cat -> Katze; owl -> Eule; dog ->");

  Lexicon tiny({{"dog", "Hund", "chien", "perro", "cane"}, {"cat", "Katze", "chat", "gato", "gatto"}});
  for (const auto& inst : gen_tt(tiny, enc, {Language::EN, Language::DE, 1}, 3, 10)) {
    const auto hund = words("Hund").front();
    const auto katze = words("Katze").front();
    CHECK((inst.answer == hund || inst.answer == katze));
  }
}

TEST_CASE("tt satisfies its invariants and covers the lexicon", "[tt]") {
  const BpeEncoder enc(desk_vocab());
  auto c = checker_for(nullptr);
  const auto suite = gen_tt(lexicon(), enc, {}, 1, 2000);
  require_clean(c, suite);
  std::map<std::vector<TokenId>, std::vector<TokenId>> target_of;
  for (std::size_t r = 0; r < lexicon().size(); ++r) {
    target_of[enc.encode(" " + lexicon().word(r, Language::EN))] = enc.encode(" " + lexicon().word(r, Language::DE));
  }
  std::set<std::vector<TokenId>> queries;
  for (const auto& inst : suite) {
    const auto* q = inst.span("query");
    const std::vector<TokenId> query(inst.prompt.begin() + static_cast<std::ptrdiff_t>(q->begin),
                                     inst.prompt.end() - static_cast<std::ptrdiff_t>(c.delims.arrow.size()));
    queries.insert(query);
    REQUIRE(target_of.count(query));
    CHECK(inst.answer == target_of[query].front());
    CHECK(inst.multi_token_answer == (target_of[query].size() > 1));
  }
  CHECK(lexicon().size() == 200);
  CHECK(queries.size() == 200);
  CHECK_THROWS_AS(gen_tt(lexicon(), enc, {Language::FR, Language::FR, 5}, 1, 1), Error);
  Lexicon two({{"dog", "Hund", "chien", "perro", "cane"}, {"cat", "Katze", "chat", "gato", "gatto"}});
  CHECK_THROWS_AS(gen_tt(two, enc, {Language::EN, Language::DE, 2}, 1, 1), Error);
}

TEST_CASE("cf swaps capitals and keeps the answer out of the prompt", "[cf]") {
  const BpeEncoder enc(desk_vocab());
  const CountryCapital canada{"Canada", "Ottawa"}, germany{"Germany", "Berlin"};
  CHECK(cf_prompt_text(canada, germany) ==
        "If we switch the capital of Canada and Germany, then Canada's capital is Berlin and Germany's capital is");
  const std::vector<CountryCapital> pair{canada, germany};
  for (const auto& inst : gen_cf(pair, enc, 5, 20)) {
    const auto text = desk_vocab().decode(inst.prompt);
    const bool canada_first = text.find("then Canada's") != std::string::npos;
    CHECK(inst.answer == enc.encode(canada_first ? " Ottawa" : " Berlin").front());
  }
  auto c = checker_for(nullptr);
  require_clean(c, gen_cf(capitals(), enc, 1, 1000));
  CHECK_THROWS_AS(gen_cf({canada}, enc, 1, 1), Error);
}

TEST_CASE("country capital control", "[cf]") {
  const BpeEncoder enc(desk_vocab());
  CHECK(country_capital_prompt_text({"France", "Paris"}) == "The capital city of France is");
  const auto suite = gen_country_capital(capitals(), enc, 3, capitals().size());
  std::set<TokenId> answers_for_france;
  for (const auto& inst : suite) {
    if (desk_vocab().decode(inst.prompt) == "The capital city of France is") answers_for_france.insert(inst.answer);
  }
  CHECK(answers_for_france == std::set<TokenId>{enc.encode(" Paris").front()});
  CHECK(dump(suite) == dump(gen_country_capital(capitals(), enc, 3, capitals().size())));
  CHECK_THROWS_AS(gen_country_capital(capitals(), enc, 3, capitals().size() + 1), Error);
}

TEST_CASE("suite files round-trip", "[io]") {
  const auto& pool = frequent_pool();
  const auto delims = Delimiters::from(BpeEncoder(desk_vocab()));
  auto suite = gen_wc(pool, {}, delims, 1, 5);
  auto lsc = gen_lsc(build_pool_index_range(desk_vocab(), 1000, 1100), {}, 2, 5);
  suite.insert(suite.end(), lsc.begin(), lsc.end());
  const auto text = dump(suite);
  std::istringstream in(text);
  CHECK(dump(read_suite(in)) == text);

  const auto first = nlohmann::ordered_json::parse(text.substr(0, text.find('\n')));
  std::vector<std::string> keys;
  for (const auto& [k, _] : first.items()) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{"task", "sample_id", "seed", "config", "prompt", "answer", "layout",
                                         "multi_token_answer"});

  std::istringstream bad("{\"task\":\"lsc\"}\n");
  CHECK_THROWS_AS(read_suite(bad), Error);
}

TEST_CASE("task names and config parsing", "[config]") {
  for (auto kind : {TaskKind::LSC, TaskKind::LSCG, TaskKind::WC, TaskKind::WI, TaskKind::TT, TaskKind::CF,
                    TaskKind::CountryCapital}) {
    CHECK(parse_task(task_name(kind)) == kind);
  }
  CHECK_THROWS_AS(parse_task("xyz"), Error);
  const auto cfg = config_from_json(TaskKind::LSCG, nlohmann::json{{"pattern_len", 3}});
  CHECK(std::get<LscgConfig>(cfg).pattern_len == 3);
  CHECK(std::get<LscgConfig>(cfg).inner_gap_len == 2);
  CHECK_THROWS_AS(validate(TaskConfig{LscConfig{0, 1}}), Error);
  CHECK_THROWS_AS(validate(TaskConfig{LscgConfig{1, 1, 33}}), Error);
  CHECK_THROWS_AS(validate(TaskConfig{WiConfig{3, 3, 1}}), Error);
}
