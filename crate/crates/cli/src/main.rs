fn main() {
    println!("zonebench");
}
