/* Tries to write outside its working directory. Prints one line per attempt
 * and exits with the number of attempts that succeeded. */
#include <fcntl.h>
#include <stdio.h>
#include <sys/stat.h>
#include <unistd.h>

static int attempt(const char* path)
{
  int fd = open(path, O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) {
    printf("denied %s\n", path);
    return 0;
  }
  write(fd, "escaped\n", 8);
  close(fd);
  printf("WROTE %s\n", path);
  return 1;
}

int main(int argc, char** argv)
{
  int escaped = 0;
  escaped += attempt("../csc-escape-probe");
  escaped += attempt("/tmp/csc-escape-probe");
  escaped += attempt("/var/tmp/csc-escape-probe");
  escaped += attempt("/dev/shm/csc-escape-probe");
  escaped += attempt("/root/csc-escape-probe");
  escaped += attempt("/etc/csc-escape-probe");
  for (int i = 1; i < argc; ++i)
    escaped += attempt(argv[i]);
  if (mkdir("/csc-escape-dir", 0755) == 0) {
    printf("WROTE /csc-escape-dir\n");
    ++escaped;
  }
  (void)attempt("inside-ok");
  return escaped;
}
