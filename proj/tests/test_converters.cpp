#include <gtest/gtest.h>

#include <random>

#include "comix/comix.hpp"
#include "support.hpp"

using namespace comix;
namespace ts = testing_support;

namespace {

UcaBook one_page_book(std::vector<AnnotationObject> anns, std::int64_t w = 100, std::int64_t h = 100) {
  UcaBook b;
  b.title = "B";
  b.dataset = {DatasetKind::c100, {}};
  UcaPage p;
  p.index = 0;
  p.width = w;
  p.height = h;
  p.annotations = std::move(anns);
  b.pages.push_back(std::move(p));
  return b;
}

AnnotationObject box(std::string id, AnnotationClass cls, double x1, double y1, double x2, double y2) {
  return {.id = std::move(id), .cls = cls, .polygon = Polygon::rectangle(x1, y1, x2, y2)};
}

Polygon ring(std::size_t n, double cx, double cy, double r) {
  std::vector<Point> pts;
  for (std::size_t i = 0; i < n; ++i) {
    double a = 2 * 3.141592653589793 * static_cast<double>(i) / static_cast<double>(n);
    pts.push_back({std::round(cx + r * std::cos(a)), std::round(cy + r * std::sin(a))});
  }
  return Polygon(std::move(pts));
}

ConvertOptions all_classes() {
  ConvertOptions o;
  o.classes.assign(kAllClasses.begin(), kAllClasses.end());
  return o;
}

/// (book position, page index, class, bbox) for every selected annotation.
using BoxKey = std::tuple<std::size_t, std::int64_t, AnnotationClass, double, double, double, double>;

std::multiset<BoxKey> boxes_of(const std::vector<UcaBook>& books) {
  std::multiset<BoxKey> out;
  for (std::size_t bi = 0; bi < books.size(); ++bi)
    for (const auto& p : books[bi].pages)
      for (const auto& a : p.annotations) {
        auto b = bbox_of(a.polygon);
        out.insert({bi, p.index, a.cls, b.x, b.y, b.w, b.h});
      }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// COCO

TEST(ToCoco, SinglePanel) {
  auto doc = to_coco({one_page_book({box("p0", AnnotationClass::panel, 0, 0, 10, 5)})});
  ASSERT_EQ(doc.annotations.size(), 1u);
  const auto& a = doc.annotations[0];
  EXPECT_EQ(a.bbox, (BBox{0, 0, 10, 5}));
  EXPECT_EQ(a.area, 50);
  EXPECT_EQ(a.category_id, 1);
  EXPECT_EQ(a.iscrowd, 0);
  EXPECT_TRUE(a.segmentation.empty());
  ASSERT_EQ(doc.images.size(), 1u);
  EXPECT_EQ(doc.images[0].file_name, "B/0.jpg");
  EXPECT_EQ(to_json(doc),
            R"({"images":[{"id":1,"file_name":"B/0.jpg","width":100,"height":100}],)"
            R"("annotations":[{"id":1,"image_id":1,"category_id":1,"bbox":[0,0,10,5],"area":50,"iscrowd":0}],)"
            R"("categories":[{"id":1,"name":"panel"},{"id":2,"name":"character"},{"id":3,"name":"text"},)"
            R"({"id":4,"name":"face"}]})"
            "\n");
}

TEST(ToCoco, ClassFilterKeepsImages) {
  ConvertOptions o;
  o.classes = {AnnotationClass::face};
  auto doc = to_coco({one_page_book({box("p0", AnnotationClass::panel, 0, 0, 10, 5)})}, o);
  EXPECT_TRUE(doc.annotations.empty());
  EXPECT_EQ(doc.images.size(), 1u);
  ASSERT_EQ(doc.categories.size(), 1u);
  EXPECT_EQ(doc.categories[0].id, 4);
}

TEST(ToCoco, NinePointBalloonSegmentation) {
  AnnotationObject b{.id = "b0", .cls = AnnotationClass::balloon, .polygon = ring(9, 50, 50, 20)};
  auto doc = to_coco({one_page_book({b})}, all_classes());
  ASSERT_EQ(doc.annotations.size(), 1u);
  EXPECT_EQ(doc.annotations[0].segmentation.size(), 18u);
  EXPECT_EQ(doc.annotations[0].bbox, bbox_of(b.polygon));
  EXPECT_EQ(doc.annotations[0].category_id, 5);
}

TEST(ToCoco, GlobalIdsAndManifestNames) {
  auto a = one_page_book({box("p0", AnnotationClass::panel, 0, 0, 1, 1)});
  auto b = a;
  b.title = "A";
  b.pages.push_back(b.pages[0]);
  b.pages[1].index = 3;
  b.pages[1].ext.attributes["file"] = "003.png";
  DatasetManifest m;
  m.entries.push_back({9, "scans/A/0.jpg", 100, 100, "A", Split::train, {DatasetKind::c100, {}}});
  ConvertOptions o;
  o.manifest = &m;
  auto doc = to_coco({a, b}, o);
  ASSERT_EQ(doc.images.size(), 3u);
  EXPECT_EQ(doc.images[0].file_name, "scans/A/0.jpg");
  EXPECT_EQ(doc.images[1].file_name, "A/3.png");
  EXPECT_EQ(doc.images[2].file_name, "B/0.jpg");
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(doc.images[i].id, static_cast<std::int64_t>(i + 1));
    EXPECT_EQ(doc.annotations[i].id, static_cast<std::int64_t>(i + 1));
    EXPECT_EQ(doc.annotations[i].image_id, static_cast<std::int64_t>(i + 1));
  }
  o.split = Split::train;
  EXPECT_EQ(to_coco({a, b}, o).images.size(), 1u);
}

TEST(ToCoco, RoundTripPreservesBoxes) {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 300; ++trial) {
    auto book = ts::random_book(rng);
    book.title = "book";
    auto back = parse_coco(to_json(to_coco({book}, all_classes())), {});
    auto expected = boxes_of({book});
    if (book.pages.empty()) {
      EXPECT_TRUE(back.empty());
      continue;
    }
    ASSERT_EQ(back.size(), 1u);
    ASSERT_EQ(boxes_of(back), expected) << "trial " << trial;
  }
}

TEST(ToCoco, CategoryIdsAreSchemeConstants) {
  std::mt19937_64 rng(8);
  std::set<std::int64_t> allowed{1, 2, 3, 4, 5, 6};
  for (int trial = 0; trial < 100; ++trial) {
    auto doc = to_coco({ts::random_book(rng)}, all_classes());
    for (const auto& a : doc.annotations) ASSERT_TRUE(allowed.count(a.category_id));
    for (const auto& c : doc.categories) ASSERT_EQ(category_scheme::class_of(c.id), class_from_name(c.name));
  }
}

// ---------------------------------------------------------------------------
// YOLO

TEST(ToYolo, FullPageLine) {
  auto files = to_yolo({one_page_book({box("p0", AnnotationClass::panel, 0, 0, 800, 1000)}, 800, 1000)});
  EXPECT_EQ(files.at("labels/B/0.txt"), "0 0.500000 0.500000 1.000000 1.000000\n");
  EXPECT_EQ(files.at("classes.txt"), "panel\ncharacter\ntext\nface\n");
}

TEST(ToYolo, HandNormalization) {
  // rect (200,150,100,200) as x,y,w,h
  auto files = to_yolo({one_page_book({box("p0", AnnotationClass::panel, 200, 150, 300, 350)}, 1000, 1000)});
  EXPECT_EQ(files.at("labels/B/0.txt"), "0 0.250000 0.250000 0.100000 0.200000\n");
}

TEST(ToYolo, ClassIndexFollowsSuppliedList) {
  ConvertOptions o;
  o.classes = {AnnotationClass::face, AnnotationClass::panel};
  auto files = to_yolo({one_page_book({box("p0", AnnotationClass::panel, 0, 0, 100, 100),
                                       box("c0", AnnotationClass::character, 0, 0, 1, 1)})},
                       o);
  EXPECT_EQ(files.at("labels/B/0.txt"), "1 0.500000 0.500000 1.000000 1.000000\n");
  EXPECT_EQ(files.at("classes.txt"), "face\npanel\n");
}

TEST(ToYolo, EmptyPageGivesEmptyFile) {
  auto files = to_yolo({one_page_book({})});
  ASSERT_TRUE(files.count("labels/B/0.txt"));
  EXPECT_EQ(files.at("labels/B/0.txt"), "");
}

TEST(ToYolo, ZeroDimPage) {
  try {
    to_yolo({one_page_book({}, 0, 100)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::zero_dim_page);
  }
}

TEST(ToYolo, ValuesClampedToUnitInterval) {
  // slightly out-of-page box (tolerated by validation) is clipped
  auto files = to_yolo({one_page_book({box("p0", AnnotationClass::panel, -2, 0, 102, 50)})});
  EXPECT_EQ(files.at("labels/B/0.txt"), "0 0.500000 0.250000 1.000000 0.500000\n");
}

TEST(ToYolo, QuantizationFixedPoint) {
  std::mt19937_64 rng(55);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<UcaBook> books;
    std::uniform_int_distribution<int> n(1, 3);
    for (int i = n(rng); i > 0; --i) {
      auto b = ts::random_book(rng);
      b.title = "book" + std::to_string(i);
      books.push_back(std::move(b));
    }
    auto once = to_yolo(books, all_classes());
    ts::TempDir dir;
    write_file_set(dir.path(), once);
    bool any_label = false;
    for (const auto& [rel, content] : once) any_label |= rel.rfind("labels/", 0) == 0;
    if (!any_label) continue;
    auto twice = to_yolo(parse_yolo(dir.path()), all_classes());
    for (const auto& [rel, content] : once)
      if (rel.rfind("labels/", 0) == 0) ASSERT_EQ(twice.at(rel), content) << rel << " trial " << trial;
  }
}

// ---------------------------------------------------------------------------
// CVAT

TEST(ToCvat, BoxPolygonAndAttributes) {
  UcaBook b = one_page_book({box("p0", AnnotationClass::panel, 0, 0, 10, 5),
                             {.id = "b0", .cls = AnnotationClass::balloon, .polygon = ring(6, 50, 50, 10)},
                             {.id = "t0",
                              .cls = AnnotationClass::text,
                              .polygon = Polygon::rectangle(1, 1, 4, 4),
                              .transcription = "HI"}});
  auto doc = to_cvat({b});
  EXPECT_NE(doc.find("<version>1.1</version>"), std::string::npos);
  EXPECT_NE(doc.find("<image id=\"0\" name=\"B/0.jpg\" width=\"100\" height=\"100\">"), std::string::npos);
  EXPECT_NE(doc.find("<box label=\"panel\" xtl=\"0\" ytl=\"0\" xbr=\"10\" ybr=\"5\"/>"), std::string::npos);
  EXPECT_NE(doc.find("<attribute name=\"transcription\">HI</attribute>"), std::string::npos);

  auto start = doc.find("<polygon label=\"balloon\" points=\"");
  ASSERT_NE(start, std::string::npos);
  start += 33;
  auto points = doc.substr(start, doc.find('"', start) - start);
  EXPECT_EQ(std::count(points.begin(), points.end(), ';'), 5);
  EXPECT_EQ(text::split(points, ';').size(), 6u);
  for (const auto& pair : text::split(points, ';')) EXPECT_EQ(std::count(pair.begin(), pair.end(), ','), 1);
  // the result is well-formed XML
  EXPECT_NO_THROW(xml::parse(doc));
}

TEST(ToCvat, CharacterAndSpeakerAttributes) {
  UcaBook b = one_page_book({{.id = "f0", .cls = AnnotationClass::face, .polygon = Polygon::rectangle(0, 0, 1, 1),
                              .char_ref = 4},
                             {.id = "t0", .cls = AnnotationClass::text, .polygon = Polygon::rectangle(0, 0, 1, 1)}});
  b.characters.push_back({4, "Ann", {}});
  b.pages[0].links.push_back({"t0", 4, {}});
  auto doc = to_cvat({b});
  EXPECT_NE(doc.find("<attribute name=\"character_id\">4</attribute>"), std::string::npos);
  EXPECT_NE(doc.find("<attribute name=\"speaker\">4</attribute>"), std::string::npos);
  auto root = xml::parse(doc);
  const auto* image = root.child("image");
  ASSERT_NE(image, nullptr);
  EXPECT_EQ(image->children.size(), 2u);
}

TEST(ToCvat, EmptyPageSelfCloses) {
  EXPECT_NE(to_cvat({one_page_book({})}).find("<image id=\"0\" name=\"B/0.jpg\" width=\"100\" height=\"100\"/>"),
            std::string::npos);
}

// ---------------------------------------------------------------------------
// Determinism

TEST(Converters, IdenticalInputsGiveIdenticalBytes) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<UcaBook> books{ts::random_book(rng), ts::random_book(rng)};
    books[0].title = "x";
    books[1].title = "y";
    auto copy = books;
    std::reverse(copy.begin(), copy.end());  // input order must not matter
    EXPECT_EQ(to_json(to_coco(books, all_classes())), to_json(to_coco(copy, all_classes())));
    EXPECT_EQ(to_cvat(books), to_cvat(copy));
    EXPECT_EQ(to_yolo(books), to_yolo(copy));
  }
}

// ---------------------------------------------------------------------------
// Stats and split

TEST(Stats, CountsPerClassAndImages) {
  std::vector<UcaBook> books;
  for (const char* title : {"A", "B"}) {
    UcaBook b;
    b.title = title;
    b.dataset = {DatasetKind::dcm, {}};
    for (int p = 0; p < 3; ++p) {
      UcaPage page;
      page.index = p;
      page.width = page.height = 100;
      page.annotations.push_back(box("p0", AnnotationClass::panel, 0, 0, 10, 10));
      b.pages.push_back(page);
    }
    books.push_back(b);
  }
  auto t = compute_stats(books, nullptr, parse_group_by("class"));
  EXPECT_EQ(t.total_images, 6);
  EXPECT_EQ(t.total_annotations, 6);
  for (const auto& r : t.rows) EXPECT_EQ(r.count, r.cls == "panel" ? 6 : 0) << r.cls;
  EXPECT_EQ(t.rows.size(), kAllClasses.size());
  auto csv = stats_to_csv(t);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "kind,dataset,split,class,count");
}

TEST(Split, TrainCountAndDeterminism) {
  std::vector<std::string> titles;
  for (int i = 0; i < 10; ++i) titles.push_back("b" + std::to_string(i));
  auto train = train_books(titles, {0.8, 42});
  EXPECT_EQ(train.size(), 8u);
  EXPECT_EQ(train, train_books(titles, {0.8, 42}));
  auto shuffled = titles;
  std::reverse(shuffled.begin(), shuffled.end());
  EXPECT_EQ(train, train_books(shuffled, {0.8, 42}));
  EXPECT_EQ(train_books({"a", "b"}, {0.5, 1}).size(), 1u);
  EXPECT_THROW(train_books({"a"}, {0.5, 1}), Error);
  EXPECT_THROW(train_books({"a", "b"}, {1.0, 1}), Error);

  // different seeds eventually give different partitions
  std::set<std::set<std::string>> seen;
  for (std::uint64_t seed = 0; seed < 20; ++seed) seen.insert(train_books(titles, {0.8, seed}));
  EXPECT_GT(seen.size(), 1u);
}

TEST(Split, ManifestKeepsBooksWhole) {
  std::mt19937_64 rng(4);
  std::vector<UcaBook> books;
  for (int i = 0; i < 6; ++i) {
    auto b = ts::random_book(rng);
    b.title = "book" + std::to_string(i);
    books.push_back(b);
  }
  auto m = make_split(books, {0.5, 7});
  std::map<std::string, std::set<Split>> per_book;
  for (const auto& e : m.entries) per_book[e.book].insert(e.split);
  for (const auto& [book, splits] : per_book) EXPECT_EQ(splits.size(), 1u) << book;
}
