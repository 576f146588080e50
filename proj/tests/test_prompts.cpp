#include <catch2/catch_amalgamated.hpp>

#include "divrep/prompts.hpp"

using namespace divrep;

TEST_CASE("attribute section parsing") {
  SECTION("well-formed reply with four bullets") {
    const std::string reply =
        "Model A contains:\n"
        "* flames\n"
        "* dark shadows\n"
        "* wet streets\n"
        "* smoke\n\n"
        "Model B contains:\n"
        "* bright colors\n";
    const auto sections = parse::attribute_sections(reply);
    REQUIRE(sections.model_a ==
            std::vector<std::string>{"flames", "dark shadows", "wet streets", "smoke"});
    REQUIRE(sections.model_b == std::vector<std::string>{"bright colors"});
  }
  SECTION("missing Model A header is a parse error") {
    REQUIRE_THROWS_AS(parse::attribute_sections("* flames\n* smoke\n"), ParseError);
  }
  SECTION("empty sections are valid") {
    const auto sections =
        parse::attribute_sections("Model A contains:\n\nModel B contains:\n");
    REQUIRE(sections.model_a.empty());
    REQUIRE(sections.model_b.empty());
  }
  SECTION("dash bullets and quotes are accepted") {
    const auto sections =
        parse::attribute_sections("model a contains:\n- \"flames\"\n- 'smoke'\n");
    REQUIRE(sections.model_a == std::vector<std::string>{"flames", "smoke"});
  }
}

TEST_CASE("description parsing") {
  const std::string reply =
      "Thought Process: the diverging prompts revolve around solitude.\n\n"
      "Description: Prompts describing lonely urban scenes at night.\n\n"
      "Key Concepts: [loneliness, empty streets, night]";
  const auto d = parse::description(reply);
  REQUIRE(d.thought == "the diverging prompts revolve around solitude.");
  REQUIRE(d.text == "Prompts describing lonely urban scenes at night.");
  REQUIRE(d.key_concepts == std::vector<std::string>{"loneliness", "empty streets", "night"});

  SECTION("missing key concepts is a parse error") {
    REQUIRE_THROWS_AS(parse::description("Description: something"), ParseError);
  }
  SECTION("empty concept list is a parse error") {
    REQUIRE_THROWS_AS(parse::description("Key Concepts: []"), ParseError);
  }
  SECTION("quoted concepts are unwrapped") {
    const auto d2 = parse::description("Key Concepts: ['anger', \"chaos\"]");
    REQUIRE(d2.key_concepts == std::vector<std::string>{"anger", "chaos"});
  }
  SECTION("retrieval text combines free text and concepts") {
    REQUIRE(d.retrieval_text() ==
            "Prompts describing lonely urban scenes at night. loneliness empty streets night");
  }
}

TEST_CASE("numbered prompt list parsing") {
  const auto items = parse::numbered_items(
      "1. A quiet street after rain\n2) A man alone at a bus stop\n\nnot numbered\n10. Another");
  REQUIRE(items == std::vector<std::string>{"A quiet street after rain",
                                            "A man alone at a bus stop", "Another"});
}

TEST_CASE("rating parsing") {
  REQUIRE(parse::rating("<rating>2</rating>") == 2);
  REQUIRE(parse::rating("Sure.\n<RATING>3</RATING> because...") == 3);
  REQUIRE_THROWS_AS(parse::rating("I think it is a 2"), ParseError);
  REQUIRE_THROWS_AS(parse::rating("<rating>7</rating>"), ParseError);
}

TEST_CASE("original/altered pair parsing") {
  const std::string reply =
      "1a. A horse grazing in a misty field. The morning is calm.\n"
      "1b. A horse grazing in a misty field near red roses. The morning is calm.\n\n"
      "2a. Children playing by a pond.\n"
      "2b. Children playing by a pond with red roses nearby.\n";
  const auto pairs = parse::prompt_pairs(reply);
  REQUIRE(pairs.size() == 2);
  REQUIRE(pairs[0].first == "A horse grazing in a misty field. The morning is calm.");
  REQUIRE(pairs[1].second == "Children playing by a pond with red roses nearby.");

  SECTION("incomplete pairs are dropped") {
    const auto p2 = parse::prompt_pairs("1a. only original\n2a. x\n2b. y\n");
    REQUIRE(p2.size() == 1);
    REQUIRE(p2[0].first == "x");
  }
  SECTION("nothing parseable throws") {
    REQUIRE_THROWS_AS(parse::prompt_pairs("no pairs here"), ParseError);
  }
}

TEST_CASE("llm-only output parsing") {
  const std::string reply =
      "Thought process: ...\n\n"
      "1. Visual Attribute: 'watercolor painting'\n"
      "Semantic Attributes: ['sadness', 'loneliness', 'mellow']\n\n"
      "2. Visual Attribute: 'bright lights'\n"
      "Semantic Attributes: ['wooden chest', 'dresser']\n";
  const auto pairs = parse::llm_only_pairs(reply);
  REQUIRE(pairs.size() == 2);
  REQUIRE(pairs[0].first == "watercolor painting");
  REQUIRE(pairs[0].second == std::vector<std::string>{"sadness", "loneliness", "mellow"});
  REQUIRE(pairs[1].first == "bright lights");
  REQUIRE_THROWS_AS(parse::llm_only_pairs("nothing structured"), ParseError);
}

TEST_CASE("hypothesis canonicalization strips forbidden phrasing") {
  REQUIRE(parse::canonicalize_hypothesis("more of baby animals") == "baby animals");
  REQUIRE(parse::canonicalize_hypothesis("Presence of baby animals") == "baby animals");
  REQUIRE(parse::canonicalize_hypothesis("Images with household objects (e.g. bowl, vacuum)") ==
          "household objects");
  REQUIRE(parse::canonicalize_hypothesis("\"low quality\"") == "low quality");
  REQUIRE(parse::canonicalize_hypothesis("realistic images") == "realistic images");
}

TEST_CASE("templates embed the inputs they are built from") {
  const auto mutation = prompts::mutation_prompt("flames", {"p one", "p two"}, {"q one"});
  REQUIRE(contains_ci(mutation, "unintended artifact of \"flames\""));
  REQUIRE(contains_ci(mutation, "- p one"));
  REQUIRE(contains_ci(mutation, "- q one"));
  REQUIRE(contains_ci(mutation, "Key Concepts"));

  Description d;
  d.text = "Lonely scenes";
  d.key_concepts = {"loneliness", "night"};
  const auto cand = prompts::candidate_prompt(25, d, "wet streets");
  REQUIRE(contains_ci(cand, "generate 25 text-2-image prompts"));
  REQUIRE(contains_ci(cand, "Lonely scenes"));
  REQUIRE(contains_ci(cand, "Key Concepts: [loneliness, night]"));
  REQUIRE(contains_ci(cand, "\"wet streets\""));

  const auto judge = prompts::judge_attribute_prompt("flames", "fire");
  REQUIRE(contains_ci(judge, "Attribute 1: \"flames\""));
  REQUIRE(contains_ci(judge, "Attribute 2: \"fire\""));
  REQUIRE(contains_ci(judge, "<rating>"));

  const auto dataset = prompts::dataset_pair_prompt("flames", {"anger", "chaos"}, {});
  REQUIRE(contains_ci(dataset, "[('anger', 'chaos'), 'flames']"));
  REQUIRE(contains_ci(dataset, "1a."));
}
