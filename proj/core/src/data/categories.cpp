#include "mobtcast/data/categories.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "mobtcast/diff/tensor.hpp"

namespace mobtcast::data {
namespace {

std::string fold(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

using Table = std::vector<std::pair<std::string, std::string>>;

constexpr const char* kArts = "Arts & Entertainment";
constexpr const char* kCollege = "College & University";
constexpr const char* kFood = "Food";
constexpr const char* kProfessional = "Professional & Other Places";
constexpr const char* kNightlife = "Nightlife Spot";
constexpr const char* kOutdoors = "Outdoors & Recreation";
constexpr const char* kShop = "Shop & Service";
constexpr const char* kTravel = "Travel & Transport";
constexpr const char* kResidence = "Residence";

Table foursquare_table() {
  Table t;
  auto map = [&t](const char* high, std::initializer_list<const char*> raws) {
    for (const char* r : raws) t.emplace_back(r, high);
  };
  map(kArts, {"Arcade", "Art Gallery", "Art Museum", "Bowling Alley", "Casino", "Comedy Club", "Concert Hall",
              "Aquarium", "Movie Theater", "Multiplex", "Indie Movie Theater", "Museum", "History Museum",
              "Science Museum", "Music Venue", "Jazz Club", "Performing Arts Venue", "Theater", "Stadium",
              "Baseball Stadium", "Basketball Stadium", "Football Stadium", "Hockey Arena", "Zoo", "Pool Hall",
              "Racetrack", "Theme Park", "Water Park", "Public Art", "General Entertainment", "Street Art",
              "Planetarium", "Dance Studio", "Cinema"});
  map(kCollege, {"University", "College Academic Building", "College Administrative Building",
                 "College Auditorium", "College Bookstore", "College Cafeteria", "College Classroom",
                 "College Gym", "College Library", "College Quad", "College Residence Hall", "College Stadium",
                 "College Theater", "Community College", "Fraternity House", "Law School", "Medical School",
                 "Student Center", "Trade School", "College & University", "General College & University",
                 "College Lab", "College Science Building", "College Technology Building", "College Arts Building",
                 "College Communications Building", "College Engineering Building", "College History Building",
                 "College Math Building"});
  map(kFood, {"American Restaurant", "Asian Restaurant", "Bagel Shop", "Bakery", "BBQ Joint", "Breakfast Spot",
              "Burger Joint", "Burrito Place", "Café", "Cafe", "Caribbean Restaurant", "Chinese Restaurant",
              "Coffee Shop", "Cuban Restaurant", "Deli / Bodega", "Dessert Shop", "Diner", "Donut Shop",
              "Dumpling Restaurant", "Fast Food Restaurant", "Food", "Food Truck", "French Restaurant",
              "Fried Chicken Joint", "Greek Restaurant", "Hot Dog Joint", "Ice Cream Shop", "Indian Restaurant",
              "Italian Restaurant", "Japanese Restaurant", "Korean Restaurant", "Latin American Restaurant",
              "Mediterranean Restaurant", "Mexican Restaurant", "Middle Eastern Restaurant", "Pizza Place",
              "Ramen / Noodle House", "Restaurant", "Salad Place", "Sandwich Place", "Seafood Restaurant",
              "Snack Place", "Soup Place", "Spanish Restaurant", "Steakhouse", "Sushi Restaurant", "Taco Place",
              "Tea Room", "Thai Restaurant", "Vegetarian / Vegan Restaurant", "Vietnamese Restaurant",
              "Wings Joint", "Cupcake Shop", "Gastropub", "Bistro", "Noodle House", "Ramen Restaurant",
              "Fish & Chips Shop", "Falafel Restaurant", "Food Court", "Juice Bar", "Southern / Soul Food Restaurant",
              "Sushi Bar", "Udon Restaurant", "Soba Restaurant", "Japanese Curry Restaurant", "Tonkatsu Restaurant",
              "Yakitori Restaurant", "Donburi Restaurant"});
  map(kProfessional, {"Building", "Office", "Medical Center", "Doctor's Office", "Dentist's Office", "Hospital",
                      "Church", "Spiritual Center", "Temple", "Mosque", "Synagogue", "Shrine",
                      "Government Building", "City Hall", "Courthouse", "Embassy / Consulate", "Factory",
                      "Fire Station", "Police Station", "Library", "Post Office", "Convention Center",
                      "Event Space", "Tech Startup", "Design Studio", "Non-Profit", "Military Base",
                      "Professional & Other Places", "Emergency Room", "School", "High School",
                      "Elementary School", "Middle School", "Nursery School", "Animal Shelter", "Cemetery",
                      "Funeral Home", "Conference Room", "Coworking Space", "Laboratory", "Voting Booth",
                      "Meeting Room", "Radio Station", "TV Station", "Parking"});
  map(kNightlife, {"Bar", "Beer Garden", "Brewery", "Cocktail Bar", "Dive Bar", "Gay Bar", "Hookah Bar",
                   "Karaoke Bar", "Lounge", "Nightclub", "Nightlife Spot", "Other Nightlife", "Pub", "Sake Bar",
                   "Sports Bar", "Whisky Bar", "Wine Bar", "Speakeasy", "Hotel Bar", "Strip Club", "Izakaya"});
  map(kOutdoors, {"Athletic & Sport", "Athletics & Sports", "Beach", "Bike Trail", "Bridge", "Campground",
                  "Garden", "Golf Course", "Gym / Fitness Center", "Gym", "Harbor / Marina", "Hiking Trail",
                  "Lake", "Mountain", "Neighborhood", "Other Great Outdoors", "Park", "Playground", "Plaza",
                  "Pool", "River", "Scenic Lookout", "Sculpture Garden", "Ski Area", "Skate Park",
                  "Soccer Field", "Tennis Court", "Basketball Court", "Baseball Field", "Dog Run", "Farm",
                  "Outdoors & Recreation", "Field", "Rock Climbing Spot", "Yoga Studio", "Cycle Studio", "Island",
                  "Vineyard", "Forest", "Volcano", "Hot Spring", "Sports Club", "Track", "Stable"});
  map(kShop, {"Arts & Crafts Store", "Automotive Shop", "Bank", "Bike Shop", "Bookstore", "Bridal Shop",
              "Camera Store", "Candy Store", "Car Dealership", "Car Wash", "Clothing Store", "Convenience Store",
              "Cosmetics Shop", "Department Store", "Drugstore / Pharmacy", "Electronics Store", "Flea Market",
              "Flower Shop", "Food & Drink Shop", "Furniture / Home Store", "Gaming Cafe", "Garden Center",
              "Gas Station / Garage", "Gift Shop", "Grocery Store", "Hardware Store", "Hobby Shop",
              "Jewelry Store", "Laundry Service", "Liquor Store", "Mall", "Market", "Miscellaneous Shop",
              "Mobile Phone Shop", "Music Store", "Nail Salon", "Optical Shop", "Other Shop", "Pet Store",
              "Record Shop", "Salon / Barbershop", "Shop & Service", "Smoke Shop", "Spa / Massage",
              "Sporting Goods Shop", "Supermarket", "Tattoo Parlor", "Thrift / Vintage Store", "Toy / Game Store",
              "Video Game Store", "Video Store", "Wine Shop", "Antique Shop", "Board Shop", "Butcher",
              "Cheese Shop", "Farmers Market", "Home Service", "Design / Fashion Store", "Boutique",
              "Photography Lab", "Recycling Facility", "Storage Facility", "Tanning Salon", "Shoe Store",
              "Paper / Office Supplies Store", "Pawn Shop", "Financial or Legal Service", "Internet Cafe",
              "Credit Union", "ATM", "Print Shop", "Real Estate Office", "Travel Agency"});
  map(kTravel, {"Airport", "Airport Gate", "Airport Lounge", "Airport Terminal", "Bus Station", "Bus Line",
                "Bus Stop", "Ferry", "General Travel", "Hostel", "Hotel", "Light Rail", "Moving Target",
                "Motel", "Platform", "Rental Car Location", "Resort", "Rest Area", "Road", "Subway", "Taxi",
                "Train Station", "Travel & Transport", "Travel Lounge", "Tunnel", "Boat or Ferry", "Pier",
                "Bed & Breakfast", "Cruise", "Port", "Train", "Tourist Information Center", "Toll Booth",
                "Toll Plaza", "Metro Station", "Intersection", "Street", "Highway", "Transportation Service",
                "Taxi Stand", "Parking Garage"});
  map(kResidence, {"Home (private)", "Home", "Residential Building (Apartment / Condo)", "Housing Development",
                   "Residence", "Apartment", "Assisted Living", "Residential Building"});
  return t;
}

// Substring rules tried in order after the table. Food terms come before the
// generic shop terms so "Coffee Shop" style labels land in Food.
Table foursquare_keywords() {
  return {{"restaurant", kFood}, {"café", kFood},         {"cafe", kFood},       {"coffee", kFood},
          {"bakery", kFood},     {"joint", kFood},        {"diner", kFood},      {"pizza", kFood},
          {"food", kFood},       {"steakhouse", kFood},   {"noodle", kFood},     {"dessert", kFood},
          {"bar", kNightlife},   {"pub", kNightlife},     {"lounge", kNightlife}, {"club", kNightlife},
          {"college", kCollege}, {"university", kCollege}, {"school", kProfessional},
          {"home", kResidence},  {"residential", kResidence}, {"apartment", kResidence},
          {"station", kTravel},  {"airport", kTravel},    {"hotel", kTravel},    {"terminal", kTravel},
          {"museum", kArts},     {"theater", kArts},      {"stadium", kArts},    {"gallery", kArts},
          {"park", kOutdoors},   {"trail", kOutdoors},    {"beach", kOutdoors},  {"field", kOutdoors},
          {"court", kOutdoors},  {"store", kShop},        {"shop", kShop},       {"salon", kShop},
          {"market", kShop},     {"service", kShop},      {"office", kProfessional},
          {"building", kProfessional}, {"center", kProfessional}};
}

constexpr const char* kEducation = "Education";
constexpr const char* kWater = "Water Features";
constexpr const char* kShops = "Shops & Service";
constexpr const char* kProfessionalArc = "Professional & Other places";
constexpr const char* kParks = "Parks & Outdoors";
constexpr const char* kLand = "Land Features";

Table arcgis_table() {
  Table t;
  auto map = [&t](const char* high, std::initializer_list<const char*> raws) {
    for (const char* r : raws) t.emplace_back(r, high);
  };
  map(kArts, {"Amusement Park", "Aquarium", "Art Gallery", "Art Museum", "Billiards", "Bowling Alley", "Casino",
              "Cinema", "Historical Monument", "History Museum", "Indoor Sports", "Jazz Club", "Landmark",
              "Live Music", "Museum", "Other Arts and Entertainment", "Racetrack", "Scientific Museum",
              "Tourist Attraction", "Wild Animal Park", "Zoo", "Theater", "Stadium", "Arts and Entertainment"});
  map(kEducation, {"College", "Fine Arts School", "Other Education", "School", "Vocational School", "University",
                   "Library", "Education"});
  map(kWater, {"Bay", "Canal", "Channel", "Cove", "Dam", "Delta", "Estuary", "Fjord", "Gulf", "Harbor",
               "Hot Spring", "Irrigation", "Jetty", "Lagoon", "Lake", "Ocean", "Other Water Feature", "Reef",
               "Reservoir", "Sea", "Sound", "Spring", "Strait", "Stream", "Swamp", "Wall", "Waterfall",
               "Well", "Wetland", "River", "Water Features"});
  map(kTravel, {"Airport", "Bed and Breakfast", "Bridge", "Bus Station", "Cargo Center", "Dock",
                "Ferry", "Heliport", "Highway Exit", "Hostel", "Hotel", "Marina", "Metro Station", "Motel",
                "Other Travel", "Port", "Railyard", "Rental Cars", "Resort", "Rest Area", "Taxi", "Tollbooth",
                "Tourist Information", "Train Station", "Transportation Service", "Truck Stop", "Tunnel",
                "Weigh Station", "Travel and Transport", "Parking"});
  map(kShops, {"ATM", "Auto Dealership", "Auto Maintenance", "Auto Parts", "Bank", "Bookstore", "Butcher",
               "Candy Store", "Car Wash", "Childrens Apparel", "Clothing Store", "Consumer Electronics Store",
               "Convenience Store", "Department Store", "Electrical", "Fitness Center", "Flea Market",
               "Food and Beverage Shop", "Footwear", "Furniture Store", "Gas Station", "Grocery",
               "Home Improvement Store", "Market", "Mens Apparel", "Mobile Phone Shop", "Motorcycle Shop",
               "Office Supplies Store", "Optical", "Other Shops and Service", "Pet Store", "Pharmacy",
               "Plumbing", "Repair Services", "Shopping Center", "Spa", "Specialty Store", "Sporting Goods Store",
               "Tire Store", "Toy Store", "Used Car Dealership", "Wholesale Warehouse", "Wine and Liquor",
               "Womens Apparel", "Shops and Service"});
  map(kResidence, {"Residence", "Home", "Apartment", "Residential"});
  map(kProfessionalArc, {"Ambulance Service", "Animal Shelter", "Business Facility", "Cemetery", "Church",
                         "City Hall", "Civic Center", "Convention Center", "Court House", "Dentist", "Doctor",
                         "Embassy", "Emergency Room", "Fire Station", "Government Office", "Hospital",
                         "Industrial Zone", "Insurance", "Legal Services", "Medical Clinic", "Military Base",
                         "Mosque", "Other Professional Place", "Other Religious Place", "Police Station",
                         "Post Office", "Prison", "Real Estate", "Social Services", "Synagogue", "Temple",
                         "Professional and Other Places", "Office"});
  map(kParks, {"Basketball", "Beach", "Campground", "Diving Center", "Fishing", "Garden", "Golf Course",
               "Golf Driving Range", "Harbor Park", "Hockey", "Ice Skating Rink", "Nature Reserve",
               "Other Parks and Outdoors", "Park", "Racquetball", "Rugby", "Shooting Range", "Ski Lift",
               "Ski Resort", "Soccer", "Sports Center", "Swimming Pool", "Tennis Court", "Trail",
               "Wildlife Reserve", "Playground", "Parks and Outdoors"});
  map(kNightlife, {"Bar or Pub", "Dancing", "Karaoke", "Night Club", "Nightlife", "Bar", "Pub"});
  map(kLand, {"Arch", "Area", "Basin", "Bench", "Bluff", "Canyon", "Cape", "Cave", "Cliff", "Continent", "Crater",
              "Crossing", "Desert", "Dune", "Field", "Forest", "Glacier", "Grassland", "Hill", "Island",
              "Isthmus", "Levee", "Meadow", "Mine", "Mountain", "Mountain Range", "Oasis", "Other Land Feature",
              "Peninsula", "Plain", "Plateau", "Point", "Ravine", "Ridge", "Rock", "Scrubland", "Valley",
              "Woods", "Land Features"});
  map(kFood, {"African Food", "American Food", "Argentinean Food", "Australian Food", "Austrian Food", "Bakery",
              "BBQ and Southern Food", "Belgian Food", "Bistro", "Brazilian Food", "Breakfast", "Brewpub",
              "British Isles Food", "Burgers", "Cajun and Creole Food", "Californian Food", "Caribbean Food",
              "Chicken Restaurant", "Chilean Food", "Chinese Food", "Coffee Shop", "Continental Food",
              "Creperie", "East European Food", "Fast Food", "Filipino Food", "Fondue", "French Food",
              "Fusion Food", "German Food", "Greek Food", "Grill", "Hawaiian Food", "Ice Cream Shop",
              "Indian Food", "Indonesian Food", "International Food", "Irish Food", "Italian Food",
              "Japanese Food", "Korean Food", "Kosher Food", "Latin American Food", "Malaysian Food",
              "Mexican Food", "Middle Eastern Food", "Moroccan Food", "Other Restaurant", "Pastries", "Pizza",
              "Polish Food", "Portuguese Food", "Restaurant", "Russian Food", "Sandwich Shop", "Scandinavian Food",
              "Seafood", "Snacks", "South American Food", "Southeast Asian Food", "Southwestern Food",
              "Spanish Food", "Steak House", "Sushi", "Swiss Food", "Tapas", "Thai Food", "Turkish Food",
              "Vegetarian Food", "Vietnamese Food", "Winery", "Food"});
  return t;
}

Table arcgis_keywords() {
  return {{"food", kFood},         {"restaurant", kFood},   {"cafe", kFood},       {"coffee", kFood},
          {"bar", kNightlife},     {"club", kNightlife},    {"school", kEducation}, {"college", kEducation},
          {"university", kEducation}, {"museum", kArts},    {"theater", kArts},    {"station", kTravel},
          {"airport", kTravel},    {"hotel", kTravel},      {"park", kParks},      {"store", kShops},
          {"shop", kShops},        {"lake", kWater},        {"river", kWater},     {"mountain", kLand},
          {"residen", kResidence}, {"office", kProfessionalArc}};
}

}  // namespace

CategoryScheme::CategoryScheme(std::string name, std::vector<std::string> high_level, const Table& table,
                               Table keywords)
    : name_(std::move(name)), names_(std::move(high_level)) {
  if (std::find(names_.begin(), names_.end(), kOtherCategory) == names_.end()) names_.emplace_back(kOtherCategory);
  if (names_.back() != kOtherCategory) throw Error("category scheme '" + name_ + "': Other must be the last id");
  auto add = [this](const std::string& raw, int id) {
    exact_.emplace(raw, id);
    folded_.emplace(fold(raw), id);
  };
  for (int i = 0; i < size(); ++i) add(names_[i], i);
  for (const auto& [raw, high] : table) add(raw, id_of(high));
  for (const auto& [word, high] : keywords) keywords_.emplace_back(fold(word), id_of(high));
}

int CategoryScheme::id_of(std::string_view high_level) const {
  for (int i = 0; i < size(); ++i) {
    if (names_[i] == high_level) return i;
  }
  throw Error("category scheme '" + name_ + "' has no high-level category '" + std::string(high_level) + "'");
}

int CategoryScheme::lookup(std::string_view raw) const {
  if (auto it = exact_.find(std::string(raw)); it != exact_.end()) return it->second;
  const std::string folded = fold(raw);
  if (auto it = folded_.find(folded); it != folded_.end()) return it->second;
  for (const auto& [word, id] : keywords_) {
    if (folded.find(word) != std::string::npos) return id;
  }
  return other_id();
}

CategoryScheme CategoryScheme::foursquare() {
  // Listed order; nine names although the source describes the set as eight.
  return CategoryScheme("foursquare",
                        {kArts, kCollege, kFood, kProfessional, kNightlife, kOutdoors, kShop, kTravel, kResidence},
                        foursquare_table(), foursquare_keywords());
}

CategoryScheme CategoryScheme::arcgis() {
  return CategoryScheme("arcgis",
                        {kArts, kEducation, kWater, kTravel, kShops, kResidence, kProfessionalArc, kParks,
                         kNightlife, kLand, kFood},
                        arcgis_table(), arcgis_keywords());
}

CategoryScheme CategoryScheme::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read category table " + path.string());
  std::vector<std::string> high;
  Table table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": expected raw<TAB>high-level");
    }
    std::string raw = line.substr(0, tab);
    std::string h = line.substr(tab + 1);
    if (h != kOtherCategory && std::find(high.begin(), high.end(), h) == high.end()) high.push_back(h);
    table.emplace_back(std::move(raw), std::move(h));
  }
  return CategoryScheme(path.stem().string(), std::move(high), table);
}

CategoryScheme CategoryScheme::named(std::string_view name_or_path) {
  if (name_or_path == "foursquare") return foursquare();
  if (name_or_path == "arcgis") return arcgis();
  return from_file(std::filesystem::path(name_or_path));
}

}  // namespace mobtcast::data
