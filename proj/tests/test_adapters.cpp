#include <gtest/gtest.h>

#include <random>

#include "comix/comix.hpp"
#include "support.hpp"

using namespace comix;
namespace ts = testing_support;

namespace {

template <typename Fn>
Error error_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "no error thrown";
  return Error(ErrorCode::invalid_argument, "none");
}

std::vector<Point> rect(double x1, double y1, double x2, double y2) {
  return {{x1, y1}, {x2, y1}, {x2, y2}, {x1, y2}};
}

const std::string kM109 =
    "<annotation title=\"T\"><characters><character id=\"c1\" name=\"A\"/></characters><pages>"
    "<page index=\"0\" width=\"200\" height=\"100\">"
    "<frame xmin=\"0\" ymin=\"0\" xmax=\"100\" ymax=\"50\"/>"
    "BODY"
    "</page></pages></annotation>";

std::string m109_with(const std::string& body) {
  auto s = kM109;
  s.replace(s.find("BODY"), 4, body);
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Manga109

TEST(Manga109, FrameBecomesPanelRectangle) {
  auto b = parse_manga109(m109_with(""));
  ASSERT_EQ(b.pages.size(), 1u);
  ASSERT_EQ(b.pages[0].annotations.size(), 1u);
  const auto& a = b.pages[0].annotations[0];
  EXPECT_EQ(a.cls, AnnotationClass::panel);
  EXPECT_EQ(a.polygon.points(), rect(0, 0, 100, 50));
  EXPECT_EQ(b.dataset.kind, DatasetKind::m109);
  EXPECT_EQ(b.ext.attributes.at("granularity"), "merged");
}

TEST(Manga109, DanglingRosterReference) {
  auto e = error_of([] {
    parse_manga109(m109_with("<body character=\"3\" xmin=\"1\" ymin=\"1\" xmax=\"5\" ymax=\"5\"/>"));
  });
  EXPECT_EQ(e.code(), ErrorCode::schema_violation);
  EXPECT_EQ(e.detail(), "DANGLING_CHAR_REF");
  EXPECT_NE(std::string(e.what()).find("/annotation/pages/page[0]/body[1]"), std::string::npos);
}

TEST(Manga109, MissingCoordinateNamesElementPath) {
  auto e = error_of([] { parse_manga109(m109_with("<face xmin=\"1\" ymin=\"1\" xmax=\"5\"/>")); });
  EXPECT_EQ(e.code(), ErrorCode::schema_violation);
  EXPECT_NE(std::string(e.what()).find("/annotation/pages/page[0]/face[1]"), std::string::npos);
  EXPECT_NE(std::string(e.what()).find("ymax"), std::string::npos);
}

TEST(Manga109, FixtureContents) {
  auto b = parse_manga109(text::read_file(ts::data_dir() / "manga109/Sample.xml"));
  EXPECT_EQ(b.title, "Sample");
  ASSERT_EQ(b.characters.size(), 2u);
  EXPECT_EQ(b.characters[1].name, "Rival");
  ASSERT_EQ(b.pages.size(), 2u);
  const auto& p0 = b.pages[0].annotations;
  ASSERT_EQ(p0.size(), 5u);
  EXPECT_EQ(p0[2].cls, AnnotationClass::character);
  EXPECT_EQ(p0[2].char_ref, 0);
  EXPECT_EQ(p0[3].cls, AnnotationClass::face);
  EXPECT_EQ(p0[4].transcription, "Where are you going?");
  EXPECT_EQ(b.pages[1].annotations[1].char_ref, 1);
  EXPECT_TRUE(validate_book(b).ok());
}

TEST(Manga109, ClassMapCanIgnoreTokens) {
  auto cm = ClassMap::manga109_default();
  cm.set("frame", std::nullopt);
  AdapterOptions opts;
  opts.class_map = cm;
  EXPECT_TRUE(parse_manga109(m109_with(""), opts).pages[0].annotations.empty());
}

// ---------------------------------------------------------------------------
// DCM

TEST(Dcm, LineExpandsToRectangle) {
  ClassMap cm{{"1", AnnotationClass::character}};
  auto page = parse_dcm_page("1 10 20 110 220\n", "p.txt", cm);
  ASSERT_EQ(page.annotations.size(), 1u);
  EXPECT_EQ(page.annotations[0].cls, AnnotationClass::character);
  EXPECT_EQ(page.annotations[0].polygon.points(), rect(10, 20, 110, 220));
}

TEST(Dcm, FourFieldsIsMalformed) {
  auto e = error_of([] { parse_dcm_page("\n1 10 20 110\n", "p.txt", ClassMap{{"1", AnnotationClass::panel}}); });
  EXPECT_EQ(e.code(), ErrorCode::line_malformed);
  EXPECT_EQ(e.pos().line, 2);
}

TEST(Dcm, UnknownTokenIsUnmapped) {
  EXPECT_EQ(error_of([] { parse_dcm_page("9 0 0 1 1", "p.txt", ClassMap::dcm_default()); }).code(),
            ErrorCode::unmapped_class);
}

TEST(Dcm, DirectoryWithImagesAndManifest) {
  ts::TempDir dir;
  ts::write(dir / "BookB/0.txt", "panel 0 0 100 100\nface 10 10 20 20\n");
  ts::write(dir / "BookB/0.png", ts::png_header(300, 400));
  ts::write(dir / "BookA/001.txt", "frame 0 0 10 10\n");
  ts::write(dir / "BookA/002.txt", "");
  // sizes for BookA come from the manifest
  DatasetManifest m;
  m.entries.push_back({1, "BookA/001.jpg", 50, 60, "BookA", Split::train, {DatasetKind::dcm, {}}});
  m.entries.push_back({2, "BookA/002.jpg", 50, 60, "BookA", Split::train, {DatasetKind::dcm, {}}});
  AdapterOptions opts;
  opts.manifest = &m;
  auto books = parse_dcm(dir.path(), opts);
  ASSERT_EQ(books.size(), 2u);
  EXPECT_EQ(books[0].title, "BookA");
  // numeric stems keep their spacing, shifted so the first page is 0
  EXPECT_EQ(books[0].pages[0].index, 0);
  EXPECT_EQ(books[0].pages[1].index, 1);
  EXPECT_EQ(books[0].pages[0].width, 50);
  EXPECT_EQ(books[1].pages[0].width, 300);
  EXPECT_EQ(books[1].pages[0].height, 400);
  EXPECT_EQ(books[1].pages[0].annotations[1].cls, AnnotationClass::face);
}

TEST(Dcm, MissingDimensionsFail) {
  ts::TempDir dir;
  ts::write(dir / "B/0.txt", "panel 0 0 1 1\n");
  EXPECT_EQ(error_of([&] { parse_dcm(dir.path()); }).code(), ErrorCode::missing_dimensions);
}

// ---------------------------------------------------------------------------
// eBDtheque

TEST(Ebd, RectBecomesFourPoints) {
  auto page = parse_ebd_page(
      "<svg width=\"100\" height=\"100\"><rect class=\"panel\" x=\"0\" y=\"0\" width=\"50\" height=\"60\"/></svg>",
      "p.svg", ClassMap::ebd_default());
  ASSERT_EQ(page.annotations.size(), 1u);
  EXPECT_EQ(page.annotations[0].polygon.points(), rect(0, 0, 50, 60));
}

TEST(Ebd, BalloonKeepsAllPoints) {
  auto page = parse_ebd_page(
      "<svg width=\"100\" height=\"100\"><g class=\"balloon\"><polygon points=\"1,1 5,0 9,1 10,5 9,9 5,10 1,9 0,5 "
      "2,2\"/></g></svg>",
      "p.svg", ClassMap::ebd_default());
  ASSERT_EQ(page.annotations.size(), 1u);
  EXPECT_EQ(page.annotations[0].cls, AnnotationClass::balloon);
  EXPECT_EQ(page.annotations[0].polygon.size(), 9u);
}

TEST(Ebd, TextLinesStaySeparate) {
  ts::TempDir dir;
  ts::write(dir / "BOOK_T01_001.svg",
            "<svg width=\"300\" height=\"200\"><polygon class=\"line\" points=\"0,0 10,0 10,5\"><title>one</title>"
            "</polygon><polygon class=\"line\" points=\"0,10 10,10 10,15\"><title>two</title></polygon>"
            "<rect class=\"page\" x=\"0\" y=\"0\" width=\"300\" height=\"200\"/></svg>");
  ts::write(dir / "BOOK_T01_002.svg", "<svg width=\"300\" height=\"200\"/>");
  auto books = parse_ebd(dir.path());
  ASSERT_EQ(books.size(), 1u);
  EXPECT_EQ(books[0].title, "BOOK_T01");
  EXPECT_EQ(books[0].ext.attributes.at("granularity"), "line");
  ASSERT_EQ(books[0].pages.size(), 2u);
  const auto& anns = books[0].pages[0].annotations;
  ASSERT_EQ(anns.size(), 2u);
  EXPECT_EQ(anns[0].transcription, "one");
  EXPECT_EQ(anns[1].transcription, "two");
}

TEST(Ebd, UnlabeledAndUnmappedFail) {
  auto cm = ClassMap::ebd_default();
  EXPECT_EQ(error_of([&] { parse_ebd_page("<svg><polygon points=\"0,0 1,0 1,1\"/></svg>", "p", cm); }).code(),
            ErrorCode::schema_violation);
  EXPECT_EQ(
      error_of([&] { parse_ebd_page("<svg><polygon class=\"cloud\" points=\"0,0 1,0 1,1\"/></svg>", "p", cm); })
          .code(),
      ErrorCode::unmapped_class);
}

// ---------------------------------------------------------------------------
// COCO

TEST(CocoAdapter, BoxBecomesRectangle) {
  auto books = parse_coco(std::string_view(
      R"({"images":[{"id":1,"file_name":"B/0.jpg","width":100,"height":100}],
          "annotations":[{"id":1,"image_id":1,"category_id":3,"bbox":[5,5,10,10],"area":100,"iscrowd":0}],
          "categories":[{"id":3,"name":"text"}]})"));
  ASSERT_EQ(books.size(), 1u);
  EXPECT_EQ(books[0].title, "B");
  EXPECT_EQ(books[0].pages[0].annotations[0].cls, AnnotationClass::text);
  EXPECT_EQ(books[0].pages[0].annotations[0].polygon.points(), rect(5, 5, 15, 15));
}

TEST(CocoAdapter, DuplicateImageId) {
  auto e = error_of([] {
    parse_coco(std::string_view(R"({"images":[{"id":7,"file_name":"a.jpg","width":1,"height":1},
                                     {"id":7,"file_name":"b.jpg","width":1,"height":1}],
                                    "annotations":[],"categories":[]})"));
  });
  EXPECT_EQ(e.code(), ErrorCode::duplicate_image_id);
}

TEST(CocoAdapter, ManifestOverridesGrouping) {
  DatasetManifest m;
  m.entries.push_back({1, "x/0.jpg", 10, 10, "Real Title", Split::test, {DatasetKind::pop, {}}});
  AdapterOptions opts;
  opts.manifest = &m;
  auto books = parse_coco(
      std::string_view(R"({"images":[{"id":1,"file_name":"x/0.jpg","width":10,"height":10}],"annotations":[],
                           "categories":[]})"),
      opts);
  ASSERT_EQ(books.size(), 1u);
  EXPECT_EQ(books[0].title, "Real Title");
  EXPECT_EQ(books[0].dataset.kind, DatasetKind::pop);
}

TEST(CocoAdapter, SchemaViolations) {
  EXPECT_EQ(error_of([] { parse_coco(std::string_view("[1]")); }).code(), ErrorCode::schema_violation);
  EXPECT_EQ(error_of([] {
              parse_coco(std::string_view(R"({"images":[{"id":1,"file_name":"a","width":1,"height":1}],
                 "annotations":[{"id":1,"image_id":2,"category_id":1,"bbox":[0,0,1,1]}],"categories":[]})"));
            }).code(),
            ErrorCode::schema_violation);
  EXPECT_EQ(error_of([] {
              parse_coco(std::string_view(R"({"images":[{"id":1,"file_name":"a","width":1,"height":1}],
                 "annotations":[{"id":1,"image_id":1,"category_id":9,"bbox":[0,0,1,1]}],
                 "categories":[{"id":9,"name":"car"}]})"));
            }).code(),
            ErrorCode::unmapped_class);
}

// ---------------------------------------------------------------------------
// YOLO

TEST(Yolo, FullPageBox) {
  auto box = parse_yolo_line("0 0.5 0.5 1.0 1.0", false, "f", 1);
  EXPECT_EQ(denormalize(box, 800, 1000), (BBox{0, 0, 800, 1000}));
}

TEST(Yolo, HandDenormalization) {
  auto box = parse_yolo_line("2 0.25 0.25 0.1 0.2", false, "f", 1);
  EXPECT_EQ(box.class_idx, 2u);
  auto b = denormalize(box, 1000, 1000);
  EXPECT_DOUBLE_EQ(b.x, 200);
  EXPECT_DOUBLE_EQ(b.y, 150);
  EXPECT_DOUBLE_EQ(b.w, 100);
  EXPECT_DOUBLE_EQ(b.h, 200);
}

TEST(Yolo, OutOfRangeAndMalformed) {
  EXPECT_EQ(error_of([] { parse_yolo_line("0 1.5 0.5 0.1 0.1", false, "f", 3); }).code(),
            ErrorCode::coord_out_of_range);
  EXPECT_EQ(error_of([] { parse_yolo_line("0 0.5 0.5 0.1", false, "f", 3); }).code(), ErrorCode::line_malformed);
  EXPECT_EQ(error_of([] { parse_yolo_line("x 0.5 0.5 0.1 0.1", false, "f", 3); }).code(), ErrorCode::line_malformed);
  // within tolerance
  EXPECT_NO_THROW(parse_yolo_line("0 1.004 0.5 0.1 0.1", false, "f", 3));
}

TEST(Yolo, TreeWithImagesDir) {
  ts::TempDir dir;
  ts::write(dir / "classes.txt", "panel\ncharacter\ntext\n");
  ts::write(dir / "labels/B/0.txt", "0 0.5 0.5 1.0 1.0\n2 0.25 0.25 0.1 0.2\n");
  ts::write(dir / "images/B/0.png", ts::png_header(800, 1000));
  auto books = parse_yolo(dir.path());
  ASSERT_EQ(books.size(), 1u);
  const auto& anns = books[0].pages[0].annotations;
  ASSERT_EQ(anns.size(), 2u);
  EXPECT_EQ(anns[0].polygon.points(), rect(0, 0, 800, 1000));
  EXPECT_EQ(anns[1].cls, AnnotationClass::text);
  EXPECT_EQ(books[0].pages[0].ext.attributes.at("file"), "0.png");
}

TEST(Yolo, IndexBeyondClassList) {
  ts::TempDir dir;
  ts::write(dir / "classes.txt", "panel\n");
  ts::write(dir / "labels/B/0.txt", "3 0.5 0.5 0.1 0.1\n");
  ts::write(dir / "images/B/0.png", ts::png_header(10, 10));
  EXPECT_EQ(error_of([&] { parse_yolo(dir.path()); }).code(), ErrorCode::unmapped_class);
}

// ---------------------------------------------------------------------------
// Format detection

TEST(Detect, YoloDirectory) {
  ts::TempDir dir;
  ts::write(dir / "classes.txt", "panel\n");
  ts::write(dir / "labels/B/0.txt", "");
  ts::write(dir / "images/B/0.png", ts::png_header(10, 10));
  EXPECT_EQ(detect_format(dir.path()), FormatId::yolo_dir);
  // flat variant: label files beside images/ and a classes file
  ts::TempDir flat;
  ts::write(flat / "classes.txt", "panel\n");
  ts::write(flat / "0.txt", "");
  ts::write(flat / "images/0.png", ts::png_header(10, 10));
  EXPECT_EQ(detect_format(flat.path()), FormatId::yolo_dir);
}

TEST(Detect, UcaBookRoot) {
  ts::TempDir dir;
  ts::write(dir / "b.xml", "<?xml version=\"1.0\"?>\n<book title=\"x\" dataset=\"dcm\"><characters/><pages/></book>");
  EXPECT_EQ(detect_format(dir / "b.xml"), FormatId::uca);
  EXPECT_EQ(detect_format(dir.path()), FormatId::uca);
}

TEST(Detect, OtherLayouts) {
  EXPECT_EQ(detect_format(ts::data_dir() / "manga109/Sample.xml"), FormatId::manga109_xml);
  EXPECT_EQ(detect_format(ts::data_dir() / "manga109"), FormatId::manga109_xml);
  ts::TempDir dir;
  ts::write(dir / "B/1.txt", "panel 0 0 1 1");
  EXPECT_EQ(detect_format(dir.path()), FormatId::dcm_txt);
  ts::write(dir / "x.json", "{}");
  EXPECT_EQ(detect_format(dir / "x.json"), FormatId::coco_json);
  ts::TempDir svg;
  ts::write(svg / "a_1.svg", "<svg/>");
  EXPECT_EQ(detect_format(svg.path()), FormatId::ebd_svg);
}

TEST(Detect, EmptyAndAmbiguous) {
  ts::TempDir empty;
  EXPECT_EQ(error_of([&] { detect_format(empty.path()); }).code(), ErrorCode::format_unknown);
  ts::TempDir mixed;
  ts::write(mixed / "a.svg", "<svg/>");
  ts::write(mixed / "b.xml", "<book title=\"x\" dataset=\"dcm\"/>");
  EXPECT_EQ(error_of([&] { detect_format(mixed.path()); }).code(), ErrorCode::format_ambiguous);
  EXPECT_EQ(error_of([&] { detect_format(mixed / "nope"); }).code(), ErrorCode::io_error);
}

// ---------------------------------------------------------------------------
// Adapter invariants

TEST(AdapterInvariants, OutputIndependentOfCreationOrder) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::pair<std::string, std::string>> files;
    std::uniform_int_distribution<int> n(1, 4), coord(0, 50);
    for (int b = n(rng); b > 0; --b)
      for (int p = n(rng); p > 0; --p) {
        std::string content;
        for (int a = n(rng); a > 0; --a)
          content += "panel " + std::to_string(coord(rng)) + " " + std::to_string(coord(rng)) + " " +
                     std::to_string(50 + coord(rng)) + " " + std::to_string(50 + coord(rng)) + "\n";
        files.emplace_back("Book" + std::to_string(b) + "/" + std::to_string(p) + ".txt", content);
      }
    std::vector<std::string> docs;
    for (int order = 0; order < 2; ++order) {
      ts::TempDir dir;
      auto copy = files;
      if (order == 1) std::shuffle(copy.begin(), copy.end(), rng);
      for (const auto& [rel, content] : copy) {
        ts::write(dir / rel, content);
        ts::write(dir / (rel.substr(0, rel.size() - 4) + ".png"), ts::png_header(100, 100));
      }
      AdapterOptions opts;
      opts.jobs = order == 0 ? 1 : 4;
      std::string all;
      for (const auto& b : parse_dcm(dir.path(), opts)) all += serialize_uca(b);
      docs.push_back(all);
    }
    ASSERT_EQ(docs[0], docs[1]);
  }
}

TEST(AdapterInvariants, InvalidOutputIsRejected) {
  // a box far outside the page must make the adapter fail, not return a bad book
  auto e = error_of([] { parse_manga109(m109_with("<face xmin=\"1\" ymin=\"1\" xmax=\"900\" ymax=\"5\"/>")); });
  EXPECT_EQ(e.code(), ErrorCode::schema_violation);
  EXPECT_EQ(e.detail(), "OUT_OF_PAGE");
  AdapterOptions lenient;
  lenient.validate = false;
  EXPECT_NO_THROW(parse_manga109(m109_with("<face xmin=\"1\" ymin=\"1\" xmax=\"900\" ymax=\"5\"/>"), lenient));
}
