#!/usr/bin/env python3
"""Regenerate the static data assets shipped inside the geoprofile crate.

Run from the repository root:

    python3 tools/gen_assets.py

The outputs are committed; this script only exists so the tables can be
audited and edited in one place instead of as opaque CSV diffs.
"""

import os

ROOT = os.path.join(os.path.dirname(__file__), "..", "crates", "geoprofile", "assets")

REGIONS = {
    "Northern Africa",
    "Sub-Saharan Africa",
    "Northern America",
    "Central America",
    "Caribbean",
    "South America",
    "Central Asia",
    "Eastern Asia",
    "South-eastern Asia",
    "Southern Asia",
    "Western Asia",
    "Eastern Europe",
    "Northern Europe",
    "Southern Europe",
    "Western Europe",
    "Australia and New Zealand",
    "Oceania (excluding Australia and New Zealand)",
}

INCOME = {"Low", "Lower Middle", "Upper Middle", "High"}

# iso2, name, continent, un_region, income_group.
# Income groups follow the World Bank FY2024 classification; region names
# follow the UN SDG regional grouping (M49), with the three Pacific
# subregions collapsed into "Oceania (excluding Australia and New Zealand)".
COUNTRIES = [
    # Northern Africa
    ("DZ", "Algeria", "AF", "Northern Africa", "Lower Middle"),
    ("EG", "Egypt", "AF", "Northern Africa", "Lower Middle"),
    ("LY", "Libya", "AF", "Northern Africa", "Upper Middle"),
    ("MA", "Morocco", "AF", "Northern Africa", "Lower Middle"),
    ("SD", "Sudan", "AF", "Northern Africa", "Low"),
    ("TN", "Tunisia", "AF", "Northern Africa", "Lower Middle"),
    ("EH", "Western Sahara", "AF", "Northern Africa", "Lower Middle"),
    # Sub-Saharan Africa
    ("AO", "Angola", "AF", "Sub-Saharan Africa", "Lower Middle"),
    ("BJ", "Benin", "AF", "Sub-Saharan Africa", "Lower Middle"),
    ("BW", "Botswana", "AF", "Sub-Saharan Africa", "Upper Middle"),
    ("BF", "Burkina Faso", "AF", "Sub-Saharan Africa", "Low"),
    ("BI", "Burundi", "AF", "Sub-Saharan Africa", "Low"),
    ("CV", "Cape Verde", "AF", "Sub-Saharan Africa", "Lower Middle"),
    ("CM", "Cameroon", "AF", "Sub-Saharan Africa", "Lower Middle"),
    ("CF", "Central African Republic", "AF", "Sub-Saharan Africa", "Low"),
    ("TD", "Chad", "AF", "Sub-Saharan Africa", "Low"),
    ("KM", "Comoros", "AF", "Sub-Saharan Africa", "Lower Middle"),
    ("CG", "Republic of the Congo", "AF", "Sub-Saharan Africa", "Lower Middle"),
    ("CD", "Democratic Republic of the Congo", "AF", "Sub-Saharan Africa", "Low"),
    ("CI", "Ivory Coast", "AF", "Sub-Saharan Africa", "Lower Middle"),
    ("DJ", "Djibouti", "AF", "Sub-Saharan Africa", "Lower Middle"),
    ("GQ", "Equatorial Guinea", "AF", "Sub-Saharan Africa", "Upper Middle"),
    ("ER", "Eritrea", "AF", "Sub-Saharan Africa", "Low"),
    ("SZ", "Eswatini", "AF", "Sub-Saharan Africa", "Lower Middle"),
    ("ET", "Ethiopia", "AF", "Sub-Saharan Africa", "Low"),
    ("GA", "Gabon", "AF", "Sub-Saharan Africa", "Upper Middle"),
    ("GM", "Gambia", "AF", "Sub-Saharan Africa", "Low"),
    ("GH", "Ghana", "AF", "Sub-Saharan Africa", "Lower Middle"),
    ("GN", "Guinea", "AF", "Sub-Saharan Africa", "Lower Middle"),
    ("GW", "Guinea-Bissau", "AF", "Sub-Saharan Africa", "Low"),
    ("KE", "Kenya", "AF", "Sub-Saharan Africa", "Lower Middle"),
    ("LS", "Lesotho", "AF", "Sub-Saharan Africa", "Lower Middle"),
    ("LR", "Liberia", "AF", "Sub-Saharan Africa", "Low"),
    ("MG", "Madagascar", "AF", "Sub-Saharan Africa", "Low"),
    ("MW", "Malawi", "AF", "Sub-Saharan Africa", "Low"),
    ("ML", "Mali", "AF", "Sub-Saharan Africa", "Low"),
    ("MR", "Mauritania", "AF", "Sub-Saharan Africa", "Lower Middle"),
    ("MU", "Mauritius", "AF", "Sub-Saharan Africa", "Upper Middle"),
    ("YT", "Mayotte", "AF", "Sub-Saharan Africa", "Lower Middle"),
    ("MZ", "Mozambique", "AF", "Sub-Saharan Africa", "Low"),
    ("NA", "Namibia", "AF", "Sub-Saharan Africa", "Upper Middle"),
    ("NE", "Niger", "AF", "Sub-Saharan Africa", "Low"),
    ("NG", "Nigeria", "AF", "Sub-Saharan Africa", "Lower Middle"),
    ("RE", "Reunion", "AF", "Sub-Saharan Africa", "High"),
    ("RW", "Rwanda", "AF", "Sub-Saharan Africa", "Low"),
    ("ST", "Sao Tome and Principe", "AF", "Sub-Saharan Africa", "Lower Middle"),
    ("SN", "Senegal", "AF", "Sub-Saharan Africa", "Lower Middle"),
    ("SC", "Seychelles", "AF", "Sub-Saharan Africa", "High"),
    ("SL", "Sierra Leone", "AF", "Sub-Saharan Africa", "Low"),
    ("SO", "Somalia", "AF", "Sub-Saharan Africa", "Low"),
    ("ZA", "South Africa", "AF", "Sub-Saharan Africa", "Upper Middle"),
    ("SS", "South Sudan", "AF", "Sub-Saharan Africa", "Low"),
    ("TZ", "Tanzania", "AF", "Sub-Saharan Africa", "Lower Middle"),
    ("TG", "Togo", "AF", "Sub-Saharan Africa", "Low"),
    ("UG", "Uganda", "AF", "Sub-Saharan Africa", "Low"),
    ("ZM", "Zambia", "AF", "Sub-Saharan Africa", "Lower Middle"),
    ("ZW", "Zimbabwe", "AF", "Sub-Saharan Africa", "Lower Middle"),
    # Northern America
    ("BM", "Bermuda", "NA", "Northern America", "High"),
    ("CA", "Canada", "NA", "Northern America", "High"),
    ("GL", "Greenland", "NA", "Northern America", "High"),
    ("PM", "Saint Pierre and Miquelon", "NA", "Northern America", "High"),
    ("US", "United States", "NA", "Northern America", "High"),
    # Central America
    ("BZ", "Belize", "NA", "Central America", "Upper Middle"),
    ("CR", "Costa Rica", "NA", "Central America", "Upper Middle"),
    ("SV", "El Salvador", "NA", "Central America", "Upper Middle"),
    ("GT", "Guatemala", "NA", "Central America", "Upper Middle"),
    ("HN", "Honduras", "NA", "Central America", "Lower Middle"),
    ("MX", "Mexico", "NA", "Central America", "Upper Middle"),
    ("NI", "Nicaragua", "NA", "Central America", "Lower Middle"),
    ("PA", "Panama", "NA", "Central America", "High"),
    # Caribbean
    ("AI", "Anguilla", "NA", "Caribbean", "High"),
    ("AG", "Antigua and Barbuda", "NA", "Caribbean", "High"),
    ("AW", "Aruba", "NA", "Caribbean", "High"),
    ("BS", "Bahamas", "NA", "Caribbean", "High"),
    ("BB", "Barbados", "NA", "Caribbean", "High"),
    ("BQ", "Caribbean Netherlands", "NA", "Caribbean", "High"),
    ("KY", "Cayman Islands", "NA", "Caribbean", "High"),
    ("CU", "Cuba", "NA", "Caribbean", "Upper Middle"),
    ("CW", "Curacao", "NA", "Caribbean", "High"),
    ("DM", "Dominica", "NA", "Caribbean", "Upper Middle"),
    ("DO", "Dominican Republic", "NA", "Caribbean", "Upper Middle"),
    ("GD", "Grenada", "NA", "Caribbean", "Upper Middle"),
    ("GP", "Guadeloupe", "NA", "Caribbean", "High"),
    ("HT", "Haiti", "NA", "Caribbean", "Lower Middle"),
    ("JM", "Jamaica", "NA", "Caribbean", "Upper Middle"),
    ("MQ", "Martinique", "NA", "Caribbean", "High"),
    ("MS", "Montserrat", "NA", "Caribbean", "High"),
    ("PR", "Puerto Rico", "NA", "Caribbean", "High"),
    ("BL", "Saint Barthelemy", "NA", "Caribbean", "High"),
    ("KN", "Saint Kitts and Nevis", "NA", "Caribbean", "High"),
    ("LC", "Saint Lucia", "NA", "Caribbean", "Upper Middle"),
    ("MF", "Saint Martin", "NA", "Caribbean", "High"),
    ("VC", "Saint Vincent and the Grenadines", "NA", "Caribbean", "Upper Middle"),
    ("SX", "Sint Maarten", "NA", "Caribbean", "High"),
    ("TT", "Trinidad and Tobago", "NA", "Caribbean", "High"),
    ("TC", "Turks and Caicos Islands", "NA", "Caribbean", "High"),
    ("VG", "British Virgin Islands", "NA", "Caribbean", "High"),
    ("VI", "U.S. Virgin Islands", "NA", "Caribbean", "High"),
    # South America
    ("AR", "Argentina", "SA", "South America", "Upper Middle"),
    ("BO", "Bolivia", "SA", "South America", "Lower Middle"),
    ("BR", "Brazil", "SA", "South America", "Upper Middle"),
    ("CL", "Chile", "SA", "South America", "High"),
    ("CO", "Colombia", "SA", "South America", "Upper Middle"),
    ("EC", "Ecuador", "SA", "South America", "Upper Middle"),
    ("FK", "Falkland Islands", "SA", "South America", "High"),
    ("GF", "French Guiana", "SA", "South America", "High"),
    ("GY", "Guyana", "SA", "South America", "Upper Middle"),
    ("PY", "Paraguay", "SA", "South America", "Upper Middle"),
    ("PE", "Peru", "SA", "South America", "Upper Middle"),
    ("SR", "Suriname", "SA", "South America", "Upper Middle"),
    ("UY", "Uruguay", "SA", "South America", "High"),
    ("VE", "Venezuela", "SA", "South America", "Upper Middle"),
    # Central Asia
    ("KZ", "Kazakhstan", "AS", "Central Asia", "Upper Middle"),
    ("KG", "Kyrgyzstan", "AS", "Central Asia", "Lower Middle"),
    ("TJ", "Tajikistan", "AS", "Central Asia", "Lower Middle"),
    ("TM", "Turkmenistan", "AS", "Central Asia", "Upper Middle"),
    ("UZ", "Uzbekistan", "AS", "Central Asia", "Lower Middle"),
    # Eastern Asia
    ("CN", "China", "AS", "Eastern Asia", "Upper Middle"),
    ("HK", "Hong Kong", "AS", "Eastern Asia", "High"),
    ("JP", "Japan", "AS", "Eastern Asia", "High"),
    ("MO", "Macau", "AS", "Eastern Asia", "High"),
    ("MN", "Mongolia", "AS", "Eastern Asia", "Upper Middle"),
    ("KP", "North Korea", "AS", "Eastern Asia", "Low"),
    ("KR", "South Korea", "AS", "Eastern Asia", "High"),
    ("TW", "Taiwan", "AS", "Eastern Asia", "High"),
    # South-eastern Asia
    ("BN", "Brunei", "AS", "South-eastern Asia", "High"),
    ("KH", "Cambodia", "AS", "South-eastern Asia", "Lower Middle"),
    ("ID", "Indonesia", "AS", "South-eastern Asia", "Upper Middle"),
    ("LA", "Laos", "AS", "South-eastern Asia", "Lower Middle"),
    ("MY", "Malaysia", "AS", "South-eastern Asia", "Upper Middle"),
    ("MM", "Myanmar", "AS", "South-eastern Asia", "Lower Middle"),
    ("PH", "Philippines", "AS", "South-eastern Asia", "Lower Middle"),
    ("SG", "Singapore", "AS", "South-eastern Asia", "High"),
    ("TH", "Thailand", "AS", "South-eastern Asia", "Upper Middle"),
    ("TL", "Timor-Leste", "AS", "South-eastern Asia", "Lower Middle"),
    ("VN", "Vietnam", "AS", "South-eastern Asia", "Lower Middle"),
    # Southern Asia
    ("AF", "Afghanistan", "AS", "Southern Asia", "Low"),
    ("BD", "Bangladesh", "AS", "Southern Asia", "Lower Middle"),
    ("BT", "Bhutan", "AS", "Southern Asia", "Lower Middle"),
    ("IN", "India", "AS", "Southern Asia", "Lower Middle"),
    ("IR", "Iran", "AS", "Southern Asia", "Lower Middle"),
    ("MV", "Maldives", "AS", "Southern Asia", "Upper Middle"),
    ("NP", "Nepal", "AS", "Southern Asia", "Lower Middle"),
    ("PK", "Pakistan", "AS", "Southern Asia", "Lower Middle"),
    ("LK", "Sri Lanka", "AS", "Southern Asia", "Lower Middle"),
    # Western Asia
    ("AM", "Armenia", "AS", "Western Asia", "Upper Middle"),
    ("AZ", "Azerbaijan", "AS", "Western Asia", "Upper Middle"),
    ("BH", "Bahrain", "AS", "Western Asia", "High"),
    ("CY", "Cyprus", "AS", "Western Asia", "High"),
    ("GE", "Georgia", "AS", "Western Asia", "Upper Middle"),
    ("IQ", "Iraq", "AS", "Western Asia", "Upper Middle"),
    ("IL", "Israel", "AS", "Western Asia", "High"),
    ("JO", "Jordan", "AS", "Western Asia", "Lower Middle"),
    ("KW", "Kuwait", "AS", "Western Asia", "High"),
    ("LB", "Lebanon", "AS", "Western Asia", "Lower Middle"),
    ("OM", "Oman", "AS", "Western Asia", "High"),
    ("PS", "Palestine", "AS", "Western Asia", "Lower Middle"),
    ("QA", "Qatar", "AS", "Western Asia", "High"),
    ("SA", "Saudi Arabia", "AS", "Western Asia", "High"),
    ("SY", "Syria", "AS", "Western Asia", "Low"),
    ("TR", "Turkey", "AS", "Western Asia", "Upper Middle"),
    ("AE", "United Arab Emirates", "AS", "Western Asia", "High"),
    ("YE", "Yemen", "AS", "Western Asia", "Low"),
    # Eastern Europe
    ("BY", "Belarus", "EU", "Eastern Europe", "Upper Middle"),
    ("BG", "Bulgaria", "EU", "Eastern Europe", "Upper Middle"),
    ("CZ", "Czech Republic", "EU", "Eastern Europe", "High"),
    ("HU", "Hungary", "EU", "Eastern Europe", "High"),
    ("MD", "Moldova", "EU", "Eastern Europe", "Upper Middle"),
    ("PL", "Poland", "EU", "Eastern Europe", "High"),
    ("RO", "Romania", "EU", "Eastern Europe", "High"),
    ("RU", "Russia", "EU", "Eastern Europe", "Upper Middle"),
    ("SK", "Slovakia", "EU", "Eastern Europe", "High"),
    ("UA", "Ukraine", "EU", "Eastern Europe", "Upper Middle"),
    # Northern Europe
    ("AX", "Aland Islands", "EU", "Northern Europe", "High"),
    ("DK", "Denmark", "EU", "Northern Europe", "High"),
    ("EE", "Estonia", "EU", "Northern Europe", "High"),
    ("FO", "Faroe Islands", "EU", "Northern Europe", "High"),
    ("FI", "Finland", "EU", "Northern Europe", "High"),
    ("GG", "Guernsey", "EU", "Northern Europe", "High"),
    ("IS", "Iceland", "EU", "Northern Europe", "High"),
    ("IE", "Ireland", "EU", "Northern Europe", "High"),
    ("IM", "Isle of Man", "EU", "Northern Europe", "High"),
    ("JE", "Jersey", "EU", "Northern Europe", "High"),
    ("LV", "Latvia", "EU", "Northern Europe", "High"),
    ("LT", "Lithuania", "EU", "Northern Europe", "High"),
    ("NO", "Norway", "EU", "Northern Europe", "High"),
    ("SJ", "Svalbard and Jan Mayen", "EU", "Northern Europe", "High"),
    ("SE", "Sweden", "EU", "Northern Europe", "High"),
    ("GB", "United Kingdom", "EU", "Northern Europe", "High"),
    # Southern Europe
    ("AL", "Albania", "EU", "Southern Europe", "Upper Middle"),
    ("AD", "Andorra", "EU", "Southern Europe", "High"),
    ("BA", "Bosnia and Herzegovina", "EU", "Southern Europe", "Upper Middle"),
    ("HR", "Croatia", "EU", "Southern Europe", "High"),
    ("GI", "Gibraltar", "EU", "Southern Europe", "High"),
    ("GR", "Greece", "EU", "Southern Europe", "High"),
    ("IT", "Italy", "EU", "Southern Europe", "High"),
    ("XK", "Kosovo", "EU", "Southern Europe", "Upper Middle"),
    ("MT", "Malta", "EU", "Southern Europe", "High"),
    ("ME", "Montenegro", "EU", "Southern Europe", "Upper Middle"),
    ("MK", "North Macedonia", "EU", "Southern Europe", "Upper Middle"),
    ("PT", "Portugal", "EU", "Southern Europe", "High"),
    ("SM", "San Marino", "EU", "Southern Europe", "High"),
    ("RS", "Serbia", "EU", "Southern Europe", "Upper Middle"),
    ("SI", "Slovenia", "EU", "Southern Europe", "High"),
    ("ES", "Spain", "EU", "Southern Europe", "High"),
    ("VA", "Vatican City", "EU", "Southern Europe", "High"),
    # Western Europe
    ("AT", "Austria", "EU", "Western Europe", "High"),
    ("BE", "Belgium", "EU", "Western Europe", "High"),
    ("FR", "France", "EU", "Western Europe", "High"),
    ("DE", "Germany", "EU", "Western Europe", "High"),
    ("LI", "Liechtenstein", "EU", "Western Europe", "High"),
    ("LU", "Luxembourg", "EU", "Western Europe", "High"),
    ("MC", "Monaco", "EU", "Western Europe", "High"),
    ("NL", "Netherlands", "EU", "Western Europe", "High"),
    ("CH", "Switzerland", "EU", "Western Europe", "High"),
    # Australia and New Zealand
    ("AU", "Australia", "OC", "Australia and New Zealand", "High"),
    ("NZ", "New Zealand", "OC", "Australia and New Zealand", "High"),
    ("NF", "Norfolk Island", "OC", "Australia and New Zealand", "High"),
    # Oceania (excluding Australia and New Zealand)
    ("AS", "American Samoa", "OC", "Oceania (excluding Australia and New Zealand)", "High"),
    ("CK", "Cook Islands", "OC", "Oceania (excluding Australia and New Zealand)", "High"),
    ("FJ", "Fiji", "OC", "Oceania (excluding Australia and New Zealand)", "Upper Middle"),
    ("PF", "French Polynesia", "OC", "Oceania (excluding Australia and New Zealand)", "High"),
    ("GU", "Guam", "OC", "Oceania (excluding Australia and New Zealand)", "High"),
    ("KI", "Kiribati", "OC", "Oceania (excluding Australia and New Zealand)", "Lower Middle"),
    ("MH", "Marshall Islands", "OC", "Oceania (excluding Australia and New Zealand)", "Upper Middle"),
    ("FM", "Micronesia", "OC", "Oceania (excluding Australia and New Zealand)", "Lower Middle"),
    ("NR", "Nauru", "OC", "Oceania (excluding Australia and New Zealand)", "High"),
    ("NC", "New Caledonia", "OC", "Oceania (excluding Australia and New Zealand)", "High"),
    ("NU", "Niue", "OC", "Oceania (excluding Australia and New Zealand)", "Upper Middle"),
    ("MP", "Northern Mariana Islands", "OC", "Oceania (excluding Australia and New Zealand)", "High"),
    ("PW", "Palau", "OC", "Oceania (excluding Australia and New Zealand)", "High"),
    ("PG", "Papua New Guinea", "OC", "Oceania (excluding Australia and New Zealand)", "Lower Middle"),
    ("WS", "Samoa", "OC", "Oceania (excluding Australia and New Zealand)", "Lower Middle"),
    ("SB", "Solomon Islands", "OC", "Oceania (excluding Australia and New Zealand)", "Lower Middle"),
    ("TK", "Tokelau", "OC", "Oceania (excluding Australia and New Zealand)", "Lower Middle"),
    ("TO", "Tonga", "OC", "Oceania (excluding Australia and New Zealand)", "Upper Middle"),
    ("TV", "Tuvalu", "OC", "Oceania (excluding Australia and New Zealand)", "Upper Middle"),
    ("VU", "Vanuatu", "OC", "Oceania (excluding Australia and New Zealand)", "Lower Middle"),
    ("WF", "Wallis and Futuna", "OC", "Oceania (excluding Australia and New Zealand)", "High"),
]

US_STATES = [
    "Alabama", "Alaska", "Arizona", "Arkansas", "California", "Colorado",
    "Connecticut", "Delaware", "District of Columbia", "Florida", "Georgia",
    "Hawaii", "Idaho", "Illinois", "Indiana", "Iowa", "Kansas", "Kentucky",
    "Louisiana", "Maine", "Maryland", "Massachusetts", "Michigan",
    "Minnesota", "Mississippi", "Missouri", "Montana", "Nebraska", "Nevada",
    "New Hampshire", "New Jersey", "New Mexico", "New York",
    "North Carolina", "North Dakota", "Ohio", "Oklahoma", "Oregon",
    "Pennsylvania", "Rhode Island", "South Carolina", "South Dakota",
    "Tennessee", "Texas", "Utah", "Vermont", "Virginia", "Washington",
    "West Virginia", "Wisconsin", "Wyoming",
]

UK_CONSTITUENTS = [
    "England", "Scotland", "Wales", "Northern Ireland", "Great Britain",
    "Britain",
]

# Continent names and vague multi-country regions: a reply naming one of
# these resolves to "no country" rather than to any single country.
VAGUE_REGIONS = [
    "Africa", "Antarctica", "Asia", "Europe", "North America", "Oceania",
    "South America", "Latin America", "Central America", "Caribbean",
    "Mediterranean", "Middle East", "Scandinavia", "Balkans", "Polynesia",
    "Micronesia", "Melanesia", "Eastern Europe", "Western Europe",
    "Southern Europe", "Northern Europe", "Central Asia", "East Asia",
    "South Asia", "Southeast Asia", "West Africa", "East Africa",
    "North Africa", "Southern Africa", "Sub-Saharan Africa",
]


# The 1,000 most common English words (graded word-frequency list, proper
# nouns removed and replaced with the next most frequent entries). Used to
# suppress single-token gazetteer matches on everyday vocabulary.
STOPWORDS_RAW = """
the of and a to in is you that it he was for on are as with his they i
at be this have from or one had by word but not what all were we when
your can said there use an each which she do how their if will up other
about out many then them these so some her would make like him into
time has look two more write go see number no way could people my than
first water been call who oil its now find long down day did get come
made may part over new sound take only little work know place year live
me back give most very after thing our just name good sentence man
think say great where help through much before line right too mean old
any same tell boy follow came want show also around form three small
set put end does another well large must big even such because turn
here why ask went men read need land different home us move try kind
hand picture again change off play spell air away animal house point
page letter mother answer found study still learn should world high
every near add food between own below country plant last school father
keep tree never start city earth eye light thought head under story saw
left don't few while along might close something seem next hard open
example begin life always those both paper together got group often run
important until children side feet car mile night walk white sea began
grow took river four carry state once book hear stop without second
later miss idea enough eat face watch far really almost let above girl
sometimes mountain cut young talk soon list song being leave family
it's body music color stand sun questions fish area mark dog horse
birds problem complete room knew since ever piece told usually didn't
friends easy heard order red door sure become top ship across today
during short better best however low hours black products happened
whole measure remember early waves reached listen wind rock space
covered fast several hold himself toward five step morning passed vowel
true hundred against pattern numeral table north slowly money map farm
pulled draw voice seen cold cried plan notice south sing war ground
fall king town unit figure certain field travel wood fire upon done
road halt ten fly gave box finally wait correct oh quickly person
became shown minutes strong verb stars front feel fact inches street
decided contain course surface produce building ocean class note
nothing rest carefully scientists inside wheels stay green known island
week less machine base ago stood plane system behind ran round boat
game force brought understand warm common bring explain dry though
language shape deep thousands yes clear equation yet government filled
heat full hot check object am rule among noun power cannot able six
size dark ball material special heavy fine pair circle include built
can't matter square syllables perhaps bill felt suddenly test direction
center farmers ready anything divided general energy subject moon
region return believe dance members picked simple cells paint mind love
cause rain exercise eggs train blue wish drop developed window
difference distance heart sit sum summer wall forest probably legs sat
main winter wide written length reason kept interest arms brother race
present beautiful store job edge past sign record finished discovered
wild happy beside gone sky glass million west lay weather root
instruments meet third months paragraph raised represent soft whether
clothes flowers shall teacher held describe drive cross speak solve
appear metal son either ice sleep village factors result jumped snow
ride care floor hill pushed baby buy century outside everything tall
already instead phrase soil bed copy free hope spring case laughed
nation quite type themselves temperature bright lead everyone method
section lake consonant within dictionary hair age amount scale pounds
although per broken moment tiny possible gold milk quiet natural lot
stone act build middle speed count cat someone sail rolled bear wonder
smiled angle fraction killed melody bottom trip hole poor let's fight
surprise died beat exactly remain dress iron couldn't fingers row least
catch climbed wrote shouted continued itself else plains gas burning
design joined foot law ears grass you're grew skin valley cents key
president brown trouble cool cloud lost sent symbols wear bad save
experiment engine alone drawing east pay single touch information
express mouth yard equal decimal yourself control practice report
straight rise statement stick party seeds suppose woman coast bank
period wire choose clean visit bit whose received garden please strange
caught fell team feeling supply corner electric insects crops tone hit
sand doctor provide thus won't cook bones tail board modern compound
mine wasn't fit addition belong safe soldiers guess silent trade rather
compare crowd poem enjoy elements indicate except expect flat seven
interesting sense string blow famous value wings movement pole exciting
branches thick blood lie spot bell fun loud consider suggested thin
position entered fruit tied rich dollars send sight chief japanese
stream planets rhythm eight science major observe tube necessary weight
meat lifted process army hat property particular swim terms current
park sell shoulder industry wash block spread cattle wife sharp company
radio we'll action capital factories settled yellow isn't southern
truck fair printed wouldn't ahead chance born level triangle molecules
repeated cause laughed nor skin women produce pure sugar nose afraid
huge sister oxygen plural various agreed opposite wrong chart prepared
pretty solution fresh shop suffix especially shoes actually nails
tropical belt corn exercise silver total deal determine evening hoe
rope cotton apple details entire sick shout flow lady students human
art feeling supply mouse region glass instrument difficult create
compound copy sentence weight capital doesn't afternoon character
effect dance conditions score increase allow phone success dead tools
luck sea view message clear card band lower sign evening guide life
wonderful knowledge serve experience chair type amount income support
article article offer position brought attention market truth health
design zero model source nice attempt motor mention economy couple
hotel jewelry kitchen bathroom bedroom flag beach wedding living dinner
coffee style fashion office manager customer service price award video
photo camera player profile search content download online website
email software version update review category item brand sale discount
quality project business management development team community social
medium news local international national event festival concert ticket
travel tour guidebook collection gallery museum display decor interior
furniture lamp carpet curtain ceiling wall garage garden backyard pool
apartment villa cottage bungalow studio rent property estate agent
listing bath shower sink mirror towel toilet stove oven fridge cabinet
shelf drawer closet wardrobe sofa couch pillow blanket mattress frame
artwork painting drawing sculpture portrait landscape photograph print
canvas poster sticker logo icon symbol badge medal trophy prize winner
champion contest competition league match score goal point rank rating
""".split()


def write_countries():
    path = os.path.join(ROOT, "country_metadata_v1.csv")
    seen_codes, seen_names = set(), set()
    for code, name, cont, region, income in COUNTRIES:
        assert len(code) == 2 and code.isupper(), code
        assert code not in seen_codes, code
        assert name not in seen_names, name
        assert cont in {"NA", "SA", "EU", "AS", "AF", "OC"}, (code, cont)
        assert region in REGIONS, (code, region)
        assert income in INCOME, (code, income)
        seen_codes.add(code)
        seen_names.add(name)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("iso2,name,continent,un_region,income_group\n")
        for code, name, cont, region, income in COUNTRIES:
            cells = [code, name, cont, region, income]
            out = []
            for c in cells:
                out.append('"%s"' % c if "," in c else c)
            f.write(",".join(out) + "\n")
    print(f"country_metadata_v1.csv: {len(COUNTRIES)} rows")


def write_list(fname, items, expect=None):
    if expect is not None:
        assert len(items) == expect, (fname, len(items))
    with open(os.path.join(ROOT, fname), "w", encoding="utf-8", newline="\n") as f:
        for it in items:
            f.write(it + "\n")
    print(f"{fname}: {len(items)} lines")


def write_stopwords():
    seen, words = set(), []
    for w in STOPWORDS_RAW:
        if w not in seen:
            seen.add(w)
            words.append(w)
    assert len(words) >= 1000, f"stop-list bank too small: {len(words)}"
    write_list("stopwords_en_1000.txt", words[:1000], expect=1000)


def main():
    os.makedirs(ROOT, exist_ok=True)
    write_countries()
    write_list("us_states.txt", US_STATES, expect=51)
    write_list("uk_constituents.txt", UK_CONSTITUENTS, expect=6)
    write_list("vague_regions.txt", VAGUE_REGIONS)
    write_stopwords()


if __name__ == "__main__":
    main()
