#pragma once

#include <string>
#include <vector>

namespace fixtures {

struct Labeled {
  std::string text;
  bool idk;
};

// 15 refusals, one or more per heuristic pattern, and 15 substantive answers
// including near misses that must not trigger.
inline const std::vector<Labeled>& idk_responses() {
  static const std::vector<Labeled> v = {
      {"I apologize, but I don't know the answer to that", true},
      {"I am not aware of any such person.", true},
      {"I'm not familiar with that entity", true},
      {"That question does not make sense to me", true},
      {"I am not able to answer this.", true},
      {"i do not know", true},
      {"Sorry, no clue here", true},
      {"I dont know who that is", true},
      {"Honestly I\xE2\x80\x99m not sure about that", true},
      {"im not sure", true},
      {"The answer is uncertain.", true},
      {"It is unclear which one you mean", true},
      {"No idea, to be honest.", true},
      {"I cant say for certain", true},
      {"There is insufficient data to answer", true},
      {"the capital is paris", false},
      {"lorpa", false},
      {"the color of mika is blue", false},
      {"He was able to climb the mountain", false},
      {"Knowledge is power", false},
      {"a sorrowful tale of kings", false},
      {"The idea came from a dream", false},
      {"She said the answer is forty two", false},
      {"the notable river is the nile", false},
      {"tuvo", false},
      {"An apology was issued in 1990", false},
      {"the insufficiently named zorbu", false},
      {"certainly it is the moon", false},
      {"the clear answer is seven", false},
      {"i know it is rome", false},
  };
  return v;
}

}  // namespace fixtures
