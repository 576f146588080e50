#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "divrep/common.hpp"

// Message templates sent to the text/vision services plus the parsers for
// their structured replies. The offline simulator recognizes these same
// markers, so template text and parser logic live together here.

namespace divrep {

struct ParseError : Error {
  using Error::Error;
};

// Parsed "describe what diverges" reply.
struct Description {
  std::string thought;
  std::string text;                       // free-form description
  std::vector<std::string> key_concepts;  // 1-3 word items

  // Text used when the description itself is embedded (retrieval mode).
  std::string retrieval_text() const {
    std::string out = text;
    if (!key_concepts.empty()) {
      if (!out.empty()) out += " ";
      out += join(key_concepts, " ");
    }
    return out;
  }
};

namespace prompts {

inline std::string bullet_lines(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& it : items) out += "- " + it + "\n";
  return out;
}

// ---- stage 1: diverging attribute discovery (vision model, over a grid) ----

inline std::string attribute_discovery_instruction(const std::string& generation_prompt) {
  return
      "This image contains two groups of images generated by two different text-2-image "
      "models. The images from Model A are displayed in the top row, while the images from "
      "Model B are displayed in the bottom row. These images are created using the following "
      "prompt:\n" +
      generation_prompt +
      "\n\n"
      "I am a machine learning researcher trying to discover differences in model outputs so I "
      "can better understand how these models compare to one another and how they associate "
      "semantic attributes with visual attributes. Do these models have a different "
      "interpretation of the same prompt?\n\n"
      "Come up with a set of distinct attributes that appear in Model A generated images more "
      "than Model B generated images. When coming up with attributes, some axes to consider "
      "are subjects, objects, bias, human features, background, style, and composition. Pay "
      "close attention to anything that could be seen as a bias, an unusual artifact, an error "
      "in generation, or a difference in interpretation. Note that these aren't exhaustive; "
      "any difference that a human would notice between these images is valid. Please write "
      "this list of visual attributes as a list separated by bullet points \"*\". These "
      "attributes will be fed into CLIP to verify differences over a larger group of images. "
      "Each attribute should be 5 words or less. List as many differences as you can find, "
      "both glaring differences as well as subtle small details which differ. Please output "
      "each attribute in the following format:\n\n"
      "Model A contains:\n"
      "* ATTRIBUTE 1\n"
      "* ATTRIBUTE 2\n\n"
      "Model B contains:\n"
      "* ATTRIBUTE 1\n"
      "* ATTRIBUTE 2\n\n"
      "List as many attributes as you can think of. Your response:";
}

// One caption per image set; used by the caption-based baselines.
inline std::string caption_instruction() {
  return
      "Caption the following images. Write one concise caption (a single sentence) describing "
      "the shared content of the images shown. Mention the main subjects, the setting, and any "
      "prominent visual attributes. Your caption:";
}

// ---- stage 2: description mutation and candidate generation ----

inline std::string mutation_prompt(const std::string& attribute,
                                   const std::vector<std::string>& diverging,
                                   const std::vector<std::string>& non_diverging) {
  return
      "I am a machine learning engineer comparing 2 text-2-image models, which we will call A "
      "and B. I have discovered that for the following set of prompts (diverging prompts), "
      "images generated by model A contain an unintended artifact of \"" +
      attribute +
      "\" while images generated by model B with the same prompt do not contain this. Here are "
      "the diverging prompts:\n" +
      bullet_lines(diverging) +
      "\n"
      "Based off of these prompts I want to discover what concepts cause this difference in "
      "models that I have seen. For reference, here is a set of prompts for which this "
      "difference is not seen (non-diverging prompts):\n" +
      bullet_lines(non_diverging) +
      "\n"
      "Please describe the concepts shared across many diverging prompts that are largely not "
      "seen in non-diverging prompts. Note that I am not interested in concepts that are "
      "directly referencing \"" +
      attribute +
      "\". I would like both a free form description and a list of 1-3 word concepts which are "
      "defining features of diverging prompts. This description should be clear, objective, "
      "and human interpretable such that a human could construct a set of diverging prompts "
      "from this description (AKA the images generated by model A contain the artifact while "
      "the images generated by model B using the same prompt do not contain it). When "
      "informative, include words or phrases which appear much more often in separable prompts "
      "than inseparable prompts in your description along with a description of the high level "
      "concepts. Please think step by step and explain your thought process before you come up "
      "with your description.\n\n"
      "Your response should be in the following format. Please ensure your thought process and "
      "description are in two separate paragraphs as shown:\n\n"
      "Thought Process: {your thought process on the differences between diverging and "
      "non-diverging prompts}\n\n"
      "Description: {a description of what concepts are indicative of diverging prompts}\n\n"
      "Key Concepts: [{diverging concept 1}, {diverging concept 2}, ..]";
}

inline std::string render_description(const Description& d) {
  std::string out = d.text;
  out += "\nKey Concepts: [" + join(d.key_concepts, ", ") + "]";
  return out;
}

inline std::string candidate_prompt(int k, const Description& description,
                                    const std::string& attribute) {
  return
      "I would like to generate " + std::to_string(k) +
      " text-2-image prompts which are likely to be diverging given this description. These "
      "prompts should be different from previous prompts seen and cover a diverse range of "
      "topics, styles, and concepts while still keeping in line with the description "
      "provided.\n\n"
      "As a reminder, here is the description:\n" +
      render_description(description) +
      "\n\n"
      "Importantly, the prompts CANNOT contain any references to \"" +
      attribute + "\" or anything directly related to \"" + attribute +
      "\". Please keep the prompts at 1 sentence each.\n\n"
      "Please provide these prompts in the following format:\n"
      "1. PROMPT 1\n"
      "2. PROMPT 2\n"
      "...";
}

// ---- attribute dedup ----

inline std::string dedup_prompt(const std::vector<std::string>& attributes) {
  return
      "The following is a list of visual attributes discovered by comparing two image "
      "generation models. Many entries are semantically equivalent (for example \"flames\" and "
      "\"fire\"). Please remove semantically equivalent attributes, keeping exactly one "
      "representative for each distinct attribute. Only output attributes from the list below; "
      "do not invent new ones or rephrase existing ones.\n\n"
      "Attributes:\n" +
      bullet_lines(attributes) +
      "\n"
      "Output the deduplicated attributes as a list separated by bullet points \"*\", one "
      "attribute per line. Your response:";
}

// ---- judging predictions against ground truth ----

inline std::string judge_attribute_prompt(const std::string& first, const std::string& second) {
  return
      "You are a data scientist inspecting a group of images to determine which visual "
      "attributes are present. Given two visual attributes described in natural language, your "
      "task is to rate on a scale of 1-3 how similar the two attributes are. Consider "
      "whether:\n\n"
      "1. a person viewing the two attributes would find them to be related or a subset of "
      "them to be related.\n"
      "2. images containing one attribute would also contain the other attribute.\n\n"
      "- A rating of 1 means the two attributes are not similar at all, and images containing "
      "one attribute would not contain the other.\n"
      "    Example of a rating of 1: (\"nature\", \"dark clouds\")\n"
      "- A rating of 2 means the two attributes are related, and the probability of images "
      "containing one attribute also containing the other is moderate. This is often applied "
      "when one attribute is a subset of the other.\n"
      "    Examples of a rating of 2: (\"nature\", \"green color palette\"), (\"nature\", "
      "\"waterfalls\"), (\"nature\", \"animals\"), (\"nature\", \"people hiking at a national "
      "park\")\n"
      "- A rating of 3 means the two attributes are very similar, and images containing one "
      "attribute would likely contain the other.\n"
      "    Example of a rating of 3: (\"nature\", \"beautiful landscapes\"), (\"nature\", "
      "\"backgrounds in nature\")\n\n"
      "Here are two visual attributes:\n"
      "Attribute 1: \"" + first + "\"\n"
      "Attribute 2: \"" + second + "\"\n\n"
      "Your output should be in the form `<rating>1/2/3</rating>`. Do NOT explain.";
}

inline std::string render_concept_set(const std::vector<std::string>& concepts) {
  std::vector<std::string> quoted;
  quoted.reserve(concepts.size());
  for (const auto& c : concepts) quoted.push_back("\"" + c + "\"");
  return "[" + join(quoted, ", ") + "]";
}

inline std::string judge_description_prompt(const std::vector<std::string>& first,
                                            const std::vector<std::string>& second) {
  return
      "You are a data scientist inspecting a group of image captions to determine which "
      "semantic concepts are present. Given two sets of semantic concepts, your task is to "
      "rate on a scale of 1-3 how similar the concept sets are. Consider whether:\n\n"
      "1. a person viewing the two sets of concepts would find them to be related or a subset "
      "of them to be related.\n"
      "2. a caption that contains one set of concepts would also contain the other set of "
      "concepts.\n\n"
      "Here is a general guideline for each rating:\n"
      "- A rating of 1 means the two sets of concepts are not similar at all, and a caption "
      "containing one set of concepts would not contain the other set. None of the items in "
      "either concept set are related.\n"
      "    Examples of a rating of 1: ([\"a cat\", \"a dog\"], [\"a car\", \"a tree\"])\n"
      "- A rating of 2 means the two sets of concepts are related, and the probability of a "
      "caption containing one set of concepts also containing the other is moderate. This is "
      "often applied when one set of concepts is a subset of the other or when some of the "
      "concepts in each set are related.\n"
      "    Examples of a rating of 2: ([\"a cat\", \"a dog\"], [\"an animal laying down\"])\n"
      "- A rating of 3 means the two sets of concepts are very similar, and a caption "
      "containing one set of concepts would likely contain the other.\n"
      "    Examples of a rating of 3: ([\"a cat\", \"a dog\"], [\"a feline\", \"a puppy\", \"a "
      "pet\"])\n\n"
      "Here are two sets of semantic concepts:\n"
      "Set 1: " + render_concept_set(first) + "\n"
      "Set 2: " + render_concept_set(second) + "\n\n"
      "Your output should be in the form `<rating>1/2/3</rating>`. Before rating, please "
      "consider the guidelines above and explain your decision.";
}

// ---- benchmark dataset creation ----

inline std::string dataset_pair_prompt(const std::string& attribute,
                                       const std::vector<std::string>& concepts,
                                       const std::vector<std::string>& already_generated) {
  std::vector<std::string> quoted;
  quoted.reserve(concepts.size());
  for (const auto& c : concepts) quoted.push_back("'" + c + "'");
  std::string tuple = "[(" + join(quoted, ", ") + "), '" + attribute + "']";
  std::string prior;
  if (!already_generated.empty()) {
    prior =
        "\nThe following original prompts have already been generated; the new prompts must "
        "cover different topics:\n" +
        bullet_lines(already_generated);
  }
  return
      "I am building a benchmark which is going to be used to find a set of text concepts "
      "which result in diffusion generated images with a distinct visual concept. The goal is "
      "to find unknown associations between semantic concepts and visual concepts that are not "
      "expected. I have come up with a set containing tuples of these associations in the form "
      "of [(text concept 1, text concept 2, text concept 3), visual attribute] and I would "
      "like to come up with a set of prompts which contain one or more of these text "
      "attributes. Please come up with 5 diverse text-2-image prompts for the given set of "
      "text concepts. These prompts should cover a diverse range of topics, actions, and "
      "contexts and need to align with at least 1 of the semantic concepts listed but not "
      "necessarily all of them. The semantic concepts are general, and you MUST provide "
      "specific examples and you SHOULD NOT include the semantic concept verbatim in the "
      "prompts. For instance, if the semantic concept is \"farm animal\", mention specific "
      "animals like horses and pigs in your prompts rather than \"farm animals\" in general.\n\n"
      "For each prompt, come up with an original and altered version: the altered version of "
      "the original prompt should include the visual attribute so the generated images for the "
      "original and altered prompt contain the exact same scene but the second image now "
      "contains the visual attribute. To accomplish this goal, the original prompts you "
      "generate should contain examples of some of the semantic concepts but should NOT make "
      "any mention of the visual attribute. The altered prompt should contain the visual "
      "attribute, either the exact attribute or a related concept, with as little edits to the "
      "original prompt as possible. Each prompt should be at least 2 full sentences.\n\n"
      "Here is the semantic concept/visual attribute tuple:\n" +
      tuple + "\n" + prior +
      "\n"
      "Please output in the following format and do not include any additional information in "
      "the output:\n"
      "1a. {original prompt for text attributes}\n"
      "1b. {altered prompt for text attributes}\n\n"
      "2a. {original prompt for text attributes}\n"
      "2b. {altered prompt for text attributes}\n\n"
      "...\n\n"
      "5a. {original prompt for text attributes}\n"
      "5b. {altered prompt for text attributes}";
}

// ---- baselines ----

struct CaptionTriple {
  std::string prompt;
  std::string caption_a;
  std::string caption_b;
};

inline std::string render_triples(const std::vector<CaptionTriple>& triples) {
  std::string out;
  for (const auto& t : triples) {
    out += "Prompt: " + t.prompt + "\n";
    out += "Caption A: " + t.caption_a + "\n";
    out += "Caption B: " + t.caption_b + "\n\n";
  }
  return out;
}

inline std::string llm_only_prompt(const std::vector<CaptionTriple>& triples) {
  return
      "I am a machine learning engineer comparing two text-to-image models, which we will call "
      "A and B. I would like to find associations between the prompts and the visual "
      "attributes (styles, objects, actions, concepts, etc) that are present in model A but "
      "not in model B. Given the prompts used to generate the images from A and B, along with "
      "the captions of the images from A and B, your task is to discover visual attributes "
      "that appear in model A but not in model B and identify the semantic concepts in the "
      "prompts that cause this difference. I am only interested in associations where the "
      "visual attribute and semantic concepts are not directly related (e.g., 'black cats' and "
      "'cats' are directly related). Here are the prompts and captions used to generate the "
      "images:\n\n" +
      render_triples(triples) +
      "Please output a list of the top 5 visual attributes that are present in model A but not "
      "in model B. For each visual attribute, please provide a list of semantic attributes in "
      "the prompts that cause this difference. Each visual attribute should be 1-3 words. "
      "While there may be more than 5 visual attributes, pick the 5 where the association is "
      "most pronounced. Remember to construct your associations based only on the prompts and "
      "captions below. Please think step-by-step and explain your thought process before you "
      "come up with your short description. Your final output should be a list formatted as "
      "follows:\n\n"
      "1. Visual Attribute: 'watercolor painting'\n"
      "Semantic Attributes: ['sadness', 'loneliness', 'mellow']\n\n"
      "2. Visual Attribute: 'bright lights'\n"
      "Semantic Attributes: ['wooden chest', 'dresser']\n\n"
      "Please adhere to the format above and provide a list of visual attributes and semantic "
      "attributes that are indicative of the visual attributes.";
}

struct CaptionPair {
  std::string caption_a;
  std::string caption_b;
};

inline std::string render_caption_pairs(const std::vector<CaptionPair>& pairs) {
  std::string out;
  for (const auto& p : pairs) {
    out += "Group A: " + p.caption_a + "\n";
    out += "Group B: " + p.caption_b + "\n\n";
  }
  return out;
}

inline std::string visdiff_proposer_prompt(const std::vector<CaptionPair>& pairs) {
  return
      "The following are the result of captioning two groups of images generated by two "
      "different image generation models, with each pair of captions corresponding to the same "
      "generation prompt:\n\n" +
      render_caption_pairs(pairs) +
      "I am a machine learning researcher trying to figure out the major differences between "
      "these two groups so I can correctly identify which model generated which image for "
      "unseen prompts.\n\n"
      "Come up with an exhaustive list of distinct concepts that are more likely to be true "
      "for Group A compared to Group B. Please write a list of captions (separated by bullet "
      "points \"*\"). For example:\n"
      "* \"dogs with brown hair\"\n"
      "* \"a cluttered scene\"\n"
      "* \"low quality\"\n"
      "* \"a joyful atmosphere\"\n\n"
      "Do not talk about the caption, e.g., \"caption with one word\" and do not list more "
      "than one concept. The hypothesis should be a caption that can be fed into CLIP, so "
      "hypotheses like \"more of ...\", \"presence of ...\", \"images with ...\" are "
      "incorrect. Also do not enumerate possibilities within parentheses. Here are examples of "
      "bad outputs and their corrections:\n"
      "* INCORRECT: \"various nature environments like lakes, forests, and mountains\" "
      "CORRECTED: \"nature\"\n"
      "* INCORRECT: \"images of household object (e.g. bowl, vacuum, lamp)\" CORRECTED: "
      "\"household objects\"\n"
      "* INCORRECT: \"Presence of baby animals\" CORRECTED: \"baby animals\"\n"
      "* INCORRECT: \"Images involving interaction between humans and animals\" CORRECTED: "
      "\"interaction between humans and animals\"\n"
      "* INCORRECT: \"More realistic images\" CORRECTED: \"realistic images\"\n"
      "* INCORRECT: \"Insects (cockroach, dragonfly, grasshopper)\" CORRECTED: \"insects\"\n\n"
      "Again, I want to figure out what the main differences are between these two image "
      "generation models so I can correctly identify which model generated which image. List "
      "properties that hold more often for the images (not captions) in group A compared to "
      "group B. Answer with a list (separated by bullet points \"*\"). Your response:";
}

}  // namespace prompts

// ---- response parsers ----

namespace parse {

inline std::string strip_quotes(std::string s) {
  s = trim(s);
  while (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                           (s.front() == '\'' && s.back() == '\''))) {
    s = trim(s.substr(1, s.size() - 2));
  }
  return s;
}

// Items of the first bracketed list found at or after `from`.
inline std::vector<std::string> bracket_list(std::string_view text, std::size_t from = 0) {
  const auto open = text.find('[', from);
  if (open == std::string_view::npos) throw ParseError("no bracketed list found");
  const auto close = text.find(']', open);
  if (close == std::string_view::npos) throw ParseError("unterminated bracketed list");
  std::vector<std::string> items;
  std::string cur;
  for (std::size_t i = open + 1; i < close; ++i) {
    if (text[i] == ',') {
      const auto item = strip_quotes(cur);
      if (!item.empty()) items.push_back(item);
      cur.clear();
    } else {
      cur.push_back(text[i]);
    }
  }
  const auto last = strip_quotes(cur);
  if (!last.empty()) items.push_back(last);
  return items;
}

// Bulleted lines: "* item" or "- item".
inline std::vector<std::string> bullet_items(std::string_view text) {
  std::vector<std::string> items;
  for (const auto& raw : split_lines(text)) {
    const std::string line = trim(raw);
    if (line.size() >= 2 && (line[0] == '*' || line[0] == '-') && line[1] == ' ') {
      const auto item = strip_quotes(line.substr(2));
      if (!item.empty()) items.push_back(item);
    }
  }
  return items;
}

struct AttributeSections {
  std::vector<std::string> model_a;
  std::vector<std::string> model_b;
};

// Splits the attribute-discovery reply into its two per-model bullet lists.
// The "Model A contains" header is mandatory; bullets may be absent when the
// model found no differences.
inline AttributeSections attribute_sections(std::string_view text) {
  AttributeSections out;
  std::vector<std::string>* current = nullptr;
  bool saw_a_header = false;
  for (const auto& raw : split_lines(text)) {
    const std::string line = trim(raw);
    if (contains_ci(line, "model a contains")) {
      current = &out.model_a;
      saw_a_header = true;
      continue;
    }
    if (contains_ci(line, "model b contains")) {
      current = &out.model_b;
      continue;
    }
    if (current && line.size() >= 2 && (line[0] == '*' || line[0] == '-') && line[1] == ' ') {
      const auto item = strip_quotes(line.substr(2));
      if (!item.empty()) current->push_back(item);
    }
  }
  if (!saw_a_header) throw ParseError("reply has no \"Model A contains\" section");
  return out;
}

// "Thought Process: ... Description: ... Key Concepts: [...]".
inline Description description(std::string_view text) {
  Description d;
  const std::string lower = to_lower(text);
  const auto kc_pos = lower.find("key concepts");
  if (kc_pos == std::string::npos) throw ParseError("reply has no \"Key Concepts:\" section");
  d.key_concepts = bracket_list(text, kc_pos);
  if (d.key_concepts.empty()) throw ParseError("\"Key Concepts:\" list is empty");

  const auto tp_pos = lower.find("thought process:");
  const auto de_pos = lower.find("description:");
  if (de_pos != std::string::npos) {
    const auto start = de_pos + std::string("description:").size();
    const auto end = kc_pos > start ? kc_pos : text.size();
    d.text = trim(text.substr(start, end - start));
  }
  if (tp_pos != std::string::npos && de_pos != std::string::npos && de_pos > tp_pos) {
    const auto start = tp_pos + std::string("thought process:").size();
    d.thought = trim(text.substr(start, de_pos - start));
  }
  return d;
}

// Lines of the form "1. text" / "2) text".
inline std::vector<std::string> numbered_items(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& raw : split_lines(text)) {
    const std::string line = trim(raw);
    std::size_t i = 0;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    if (i == 0 || i >= line.size()) continue;
    if (line[i] != '.' && line[i] != ')') continue;
    const auto item = trim(line.substr(i + 1));
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// "<rating>N</rating>" with N in 1..3.
inline int rating(std::string_view text) {
  const std::string lower = to_lower(text);
  const auto open = lower.find("<rating>");
  if (open == std::string::npos) throw ParseError("reply has no <rating> tag");
  const auto start = open + std::string("<rating>").size();
  const auto close = lower.find("</rating>", start);
  const auto body = trim(text.substr(start, close == std::string::npos ? 1 : close - start));
  if (body.empty() || body[0] < '1' || body[0] > '3') {
    throw ParseError("rating is not in 1..3: '" + body + "'");
  }
  return body[0] - '0';
}

// "1a. original / 1b. altered" blocks, ordered by index.
inline std::vector<std::pair<std::string, std::string>> prompt_pairs(std::string_view text) {
  std::map<int, std::pair<std::string, std::string>> by_index;
  for (const auto& raw : split_lines(text)) {
    const std::string line = trim(raw);
    std::size_t i = 0;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    if (i == 0 || i + 1 >= line.size()) continue;
    const char side = static_cast<char>(std::tolower(static_cast<unsigned char>(line[i])));
    if (side != 'a' && side != 'b') continue;
    if (line[i + 1] != '.' && line[i + 1] != ')') continue;
    const int idx = std::stoi(line.substr(0, i));
    const auto body = strip_quotes(trim(line.substr(i + 2)));
    if (body.empty()) continue;
    if (side == 'a') {
      by_index[idx].first = body;
    } else {
      by_index[idx].second = body;
    }
  }
  std::vector<std::pair<std::string, std::string>> out;
  for (auto& [idx, pair] : by_index) {
    if (!pair.first.empty() && !pair.second.empty()) out.push_back(std::move(pair));
  }
  if (out.empty()) throw ParseError("no complete original/altered prompt pairs found");
  return out;
}

// "N. Visual Attribute: 'x'" followed by "Semantic Attributes: [...]".
inline std::vector<std::pair<std::string, std::vector<std::string>>> llm_only_pairs(
    std::string_view text) {
  std::vector<std::pair<std::string, std::vector<std::string>>> out;
  const std::string lower = to_lower(text);
  std::size_t pos = 0;
  for (;;) {
    const auto va = lower.find("visual attribute:", pos);
    if (va == std::string::npos) break;
    const auto line_end = text.find('\n', va);
    const auto value_start = va + std::string("visual attribute:").size();
    const auto attr = strip_quotes(
        trim(text.substr(value_start, (line_end == std::string_view::npos ? text.size()
                                                                          : line_end) -
                                          value_start)));
    const auto sa = lower.find("semantic attributes:", va);
    if (attr.empty() || sa == std::string::npos) {
      pos = va + 1;
      continue;
    }
    std::vector<std::string> concepts;
    try {
      concepts = bracket_list(text, sa);
    } catch (const ParseError&) {
      pos = va + 1;
      continue;
    }
    out.emplace_back(attr, std::move(concepts));
    pos = sa + 1;
  }
  if (out.empty()) throw ParseError("no visual/semantic attribute pairs found");
  return out;
}

// Normalizes a difference hypothesis to a CLIP-friendly caption: strips the
// phrasing the proposer instruction forbids and drops parenthetical
// enumerations.
inline std::string canonicalize_hypothesis(std::string s) {
  s = strip_quotes(s);
  // drop "(e.g. ...)" style parentheticals
  for (;;) {
    const auto open = s.find('(');
    if (open == std::string::npos) break;
    const auto close = s.find(')', open);
    if (close == std::string::npos) {
      s = s.substr(0, open);
      break;
    }
    s = s.substr(0, open) + s.substr(close + 1);
  }
  s = normalize_whitespace(s);
  const char* prefixes[] = {"more of ", "presence of ", "images with ", "images of ",
                            "more ",    "images involving "};
  bool changed = true;
  while (changed) {
    changed = false;
    for (const char* p : prefixes) {
      if (starts_with_ci(s, p)) {
        s = trim(s.substr(std::string(p).size()));
        changed = true;
      }
    }
  }
  return s;
}

}  // namespace parse
}  // namespace divrep
